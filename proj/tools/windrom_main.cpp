#include <CLI11.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "windrom/config.hpp"
#include "windrom/ingest.hpp"
#include "windrom/model_io.hpp"
#include "windrom/pipeline.hpp"

namespace {

struct ConfigCli {
  std::string config_path;
  windrom::PipelineConfig config;

  // flag presence tracked through CLI11 counts; config file applied first
  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file");
    cmd->add_option("--interval", config.interval_s, "snapshot interval in seconds");
    cmd->add_option("--inner-product", config.inner_product_type,
                    "space-stochastic inner product type (0, 1, or 2)");
    cmd->add_option("--bd-threshold", config.bd_energy_threshold,
                    "temporal energy fraction to retain");
    cmd->add_option("--kle-threshold", config.kle_energy_threshold,
                    "spatial energy fraction to retain per mode");
    cmd->add_option("--bandwidth-rule", config.bandwidth_rule, "approx or exact");
    cmd->add_option("--welch-segment", config.welch_segment, "Welch segment length");
    cmd->add_option("--welch-overlap", config.welch_overlap, "Welch overlap fraction");
    cmd->add_option("--seed", config.seed, "master random seed");
    cmd->add_option("--levels", config.levels, "vertical levels after interpolation");
    cmd->add_flag("--kle-unbiased", config.kle_unbiased, "use the n-1 covariance divisor");
    cmd->add_flag("--global-dx", config.global_dx, "day-mean snapshot spacing");
    cmd->add_flag("--dump-covariance", config.dump_covariance,
                  "store the temporal covariance in the model file");
  }

  windrom::PipelineConfig resolve(CLI::App* cmd) const {
    windrom::PipelineConfig resolved = config;
    if (!config_path.empty()) {
      resolved = windrom::load_config_file(config_path);
      // explicit flags override file values
      const auto take = [&](const char* flag, auto member) {
        if (cmd->count(flag) > 0) resolved.*member = config.*member;
      };
      take("--interval", &windrom::PipelineConfig::interval_s);
      take("--inner-product", &windrom::PipelineConfig::inner_product_type);
      take("--bd-threshold", &windrom::PipelineConfig::bd_energy_threshold);
      take("--kle-threshold", &windrom::PipelineConfig::kle_energy_threshold);
      take("--bandwidth-rule", &windrom::PipelineConfig::bandwidth_rule);
      take("--welch-segment", &windrom::PipelineConfig::welch_segment);
      take("--welch-overlap", &windrom::PipelineConfig::welch_overlap);
      take("--seed", &windrom::PipelineConfig::seed);
      take("--levels", &windrom::PipelineConfig::levels);
      take("--kle-unbiased", &windrom::PipelineConfig::kle_unbiased);
      take("--global-dx", &windrom::PipelineConfig::global_dx);
      take("--dump-covariance", &windrom::PipelineConfig::dump_covariance);
    }
    resolved.validate();
    return resolved;
  }
};

windrom::VelocityEnsemble load_input(const std::vector<std::string>& csv_paths,
                                     const std::string& ensemble_path,
                                     const windrom::PipelineConfig& config) {
  if (!ensemble_path.empty()) {
    if (!csv_paths.empty())
      windrom::raise(windrom::errc::invalid_argument,
                     "give either CSV inputs or an ensemble file, not both");
    return windrom::read_ensemble_file(ensemble_path);
  }
  if (csv_paths.empty())
    windrom::raise(windrom::errc::invalid_argument, "no input files given");

  std::vector<windrom::VelocityEnsemble> days;
  days.reserve(csv_paths.size());
  const auto rule = config.global_dx ? windrom::DxRule::global_mean
                                     : windrom::DxRule::per_interval;
  for (const auto& path : csv_paths) {
    const auto tower = windrom::load_tower_csv(path);
    std::vector<double> targets(config.levels);
    const double lo = tower.sensor_heights.front();
    const double hi = tower.sensor_heights.back();
    for (int i = 0; i < config.levels; ++i)
      targets[i] = lo + (hi - lo) * static_cast<double>(i) / (config.levels - 1);
    const auto levels = windrom::interpolate_vertical(tower, targets);
    days.push_back(windrom::build_snapshots(levels, config.interval_s, rule));
  }
  return windrom::assemble_ensemble(days);
}

void print_spectrum(const Eigen::VectorXd& fractions, int limit) {
  double cumulative = 0.0;
  const int shown = std::min<int>(limit, static_cast<int>(fractions.size()));
  for (int i = 0; i < shown; ++i) {
    cumulative += fractions[i];
    std::printf("  mode %2d: fraction %.4f  cumulative %.4f\n", i + 1, fractions[i], cumulative);
  }
}

int run_decompose(const std::vector<std::string>& csv_paths, const std::string& ensemble_path,
                  const std::string& output, const std::string& save_ensemble,
                  const windrom::PipelineConfig& config) {
  const auto source = load_input(csv_paths, ensemble_path, config);
  std::printf("source: %d realizations, %d intervals, grid %d x %d, interval %g s\n",
              source.n_realizations, source.n_intervals, source.grid.nz(), source.grid.nx,
              source.grid.interval_s);

  const auto result = windrom::decompose(source, config);
  std::printf("temporal energy spectrum:\n");
  print_spectrum(result.bd.energy_fractions, std::min(result.bd.retained + 3, 12));
  std::printf("retained M = %d at %.0f%% energy\n", result.bd.retained,
              100.0 * config.bd_energy_threshold);
  for (std::size_t i = 0; i < result.kle.size(); ++i) {
    const auto& mode = result.kle[i];
    const double total = mode.eigenvalues.sum();
    double covered = 0.0;
    for (int j = 0; j < mode.retained; ++j) covered += mode.eigenvalues[j];
    std::printf("  spatial mode %zu: N = %d (%.4f of mode energy)\n", i + 1, mode.retained,
                total > 0 ? covered / total : 0.0);
  }
  double worst_cross = 0.0;
  for (Eigen::Index a = 0; a < result.xi_cross_correlation.rows(); ++a)
    for (Eigen::Index b = a + 1; b < result.xi_cross_correlation.cols(); ++b)
      worst_cross = std::max(worst_cross, std::abs(result.xi_cross_correlation(a, b)));
  std::printf("max |cross-mode xi correlation| = %.3e (reported, not enforced)\n", worst_cross);

  windrom::write_model(output, result.model);
  std::printf("wrote %s (%ju bytes)\n", output.c_str(),
              static_cast<std::uintmax_t>(std::filesystem::file_size(output)));
  if (!save_ensemble.empty()) {
    windrom::write_ensemble_file(save_ensemble, source);
    std::printf("wrote %s\n", save_ensemble.c_str());
  }
  return 0;
}

int run_synthesize(const std::string& model_path, int count, std::uint64_t seed,
                   const std::string& output) {
  const auto model = windrom::read_model(model_path);
  const auto ensemble = windrom::generate_ensemble(model, count, seed);
  windrom::write_ensemble_file(output, ensemble);
  std::printf("wrote %d realizations (%d intervals, grid %d x %d) to %s\n",
              ensemble.n_realizations, ensemble.n_intervals, ensemble.grid.nz(),
              ensemble.grid.nx, output.c_str());
  return 0;
}

int run_diagnose(const std::string& source_path, const std::string& synth_path,
                 const std::string& output_dir, const windrom::PipelineConfig& config) {
  const auto source = windrom::read_ensemble_file(source_path);
  const auto synthetic = windrom::read_ensemble_file(synth_path);
  const auto report = windrom::diagnose(source, synthetic, config);
  windrom::write_diagnosis_reports(output_dir, report);
  std::printf("covariance error epsilon = %.6g\n", report.covariance_err);
  std::printf("wrote reports to %s\n", output_dir.c_str());
  return 0;
}

int run_info(const std::string& model_path) {
  const auto model = windrom::read_model(model_path);
  const auto size = std::filesystem::file_size(model_path);
  std::printf("model file: %s (%ju bytes)\n", model_path.c_str(),
              static_cast<std::uintmax_t>(size));
  std::printf("grid: %d levels x %d along-wind samples, interval %g s, dx %g m\n",
              model.grid.nz(), model.grid.nx, model.grid.interval_s, model.grid.dx);
  std::printf("intervals per realization: %d\n", model.n_intervals);
  std::printf("retained temporal modes M = %d, stochastic terms = %d\n", model.retained(),
              model.stochastic_terms());
  const double total = model.bd_spectrum.sum();
  std::printf("temporal energy fractions:\n");
  if (total > 0) print_spectrum((model.bd_spectrum / total).eval(), model.retained() + 3);
  for (int i = 0; i < model.retained(); ++i)
    std::printf("  spatial mode %d: N = %d terms, %d observations per variable\n", i + 1,
                model.modes[i].terms(),
                model.modes[i].terms() > 0 ? model.modes[i].xi_pdfs.front().count() : 0);
  std::printf("source checksum: %016" PRIx64 "\n", model.source_checksum);
  std::printf("config echo:\n%s", model.config_echo.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"windrom: low-dimensional stochastic wind-field models from tower ensembles"};
  app.require_subcommand(1);

  auto* dec = app.add_subcommand("decompose", "build a reduced model from tower data");
  std::vector<std::string> dec_inputs;
  std::string dec_input_ensemble, dec_output, dec_save_ensemble;
  ConfigCli dec_cfg;
  dec->add_option("--input", dec_inputs, "tower CSV files, one per day");
  dec->add_option("--input-ensemble", dec_input_ensemble, "binary ensemble file");
  dec->add_option("--output", dec_output, "model file to write")->required();
  dec->add_option("--save-ensemble", dec_save_ensemble, "also write the assembled ensemble");
  dec_cfg.attach(dec);

  auto* syn = app.add_subcommand("synthesize", "generate realizations from a model");
  std::string syn_model, syn_output;
  int syn_count = 28;
  std::uint64_t syn_seed = 1;
  syn->add_option("--model", syn_model, "model file")->required();
  syn->add_option("--count", syn_count, "number of realizations");
  syn->add_option("--seed", syn_seed, "master random seed");
  syn->add_option("--output", syn_output, "ensemble file to write")->required();

  auto* dia = app.add_subcommand("diagnose", "compare synthetic and source ensembles");
  std::string dia_source, dia_synth, dia_output_dir;
  ConfigCli dia_cfg;
  dia->add_option("--source", dia_source, "source ensemble file")->required();
  dia->add_option("--synth", dia_synth, "synthetic ensemble file")->required();
  dia->add_option("--output-dir", dia_output_dir, "report directory")->required();
  dia_cfg.attach(dia);

  auto* inf = app.add_subcommand("info", "print a model summary");
  std::string inf_model;
  inf->add_option("--model", inf_model, "model file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (dec->parsed()) {
      auto config = dec_cfg.resolve(dec);
      return run_decompose(dec_inputs, dec_input_ensemble, dec_output, dec_save_ensemble, config);
    }
    if (syn->parsed()) return run_synthesize(syn_model, syn_count, syn_seed, syn_output);
    if (dia->parsed()) {
      auto config = dia_cfg.resolve(dia);
      return run_diagnose(dia_source, dia_synth, dia_output_dir, config);
    }
    if (inf->parsed()) return run_info(inf_model);
  } catch (const windrom::Error& err) {
    std::fprintf(stderr, "windrom %s: %s\n",
                 app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name().c_str(),
                 err.what());
    return 1;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "windrom: %s\n", err.what());
    return 1;
  }
  return 0;
}
