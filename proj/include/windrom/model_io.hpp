#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "windrom/core.hpp"
#include "windrom/synth.hpp"

namespace windrom {

namespace detail {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline void fnv1a_update(std::uint64_t& hash, const unsigned char* bytes, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    hash ^= bytes[i];
    hash *= kFnvPrime;
  }
}

/// Binary writer with little-endian scalars and a running FNV-1a hash of
/// every byte written, so the trailer can seal the file.
class HashedWriter {
 public:
  explicit HashedWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) raise(errc::io_error, "cannot open " + path + " for writing");
  }

  void bytes(const void* data, std::size_t count) {
    fnv1a_update(hash_, static_cast<const unsigned char*>(data), count);
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(count));
  }

  void u32(std::uint32_t v) { scalar(v); }
  void u64(std::uint64_t v) { scalar(v); }
  void f64(double v) { scalar(std::bit_cast<std::uint64_t>(v)); }

  void text(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  void array(const std::string& name, const std::vector<std::uint64_t>& dims,
             const double* data) {
    text(name);
    u32(static_cast<std::uint32_t>(dims.size()));
    std::uint64_t count = 1;
    for (std::uint64_t d : dims) {
      u64(d);
      count *= d;
    }
    for (std::uint64_t i = 0; i < count; ++i) f64(data[i]);
  }

  std::uint64_t hash() const { return hash_; }

  void trailer() {
    const std::uint64_t h = hash_;
    scalar_raw(h);
    out_.flush();
    if (!out_) raise(errc::io_error, "write failure");
  }

 private:
  template <typename T>
  void scalar(T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, sizeof(T));
  }

  template <typename T>
  void scalar_raw(T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(buf), sizeof(T));
  }

  std::ofstream out_;
  std::uint64_t hash_ = kFnvOffset;
};

class HashedReader {
 public:
  explicit HashedReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) raise(errc::io_error, "cannot open " + path);
  }

  void bytes(void* data, std::size_t count) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in_.gcount()) != count)
      raise(errc::corrupt_model, "file truncated");
    fnv1a_update(hash_, static_cast<const unsigned char*>(data), count);
  }

  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(scalar<std::uint64_t>()); }

  std::string text(std::size_t limit = 1 << 20) {
    const std::uint32_t len = u32();
    if (len > limit) raise(errc::corrupt_model, "string length out of range");
    std::string s(len, '\0');
    if (len > 0) bytes(s.data(), len);
    return s;
  }

  /// Reads one named array; the caller checks the name and shape.
  void array(std::string& name, std::vector<std::uint64_t>& dims, std::vector<double>& data) {
    name = text(256);
    const std::uint32_t ndim = u32();
    if (ndim == 0 || ndim > 8) raise(errc::corrupt_model, "array rank out of range");
    dims.resize(ndim);
    std::uint64_t count = 1;
    for (auto& d : dims) {
      d = u64();
      if (d > (1ULL << 30)) raise(errc::corrupt_model, "array size out of range");
      count *= d;
      if (count > (1ULL << 30)) raise(errc::corrupt_model, "array size out of range");
    }
    data.resize(count);
    for (auto& v : data) v = f64();
  }

  void check_trailer() {
    const std::uint64_t expected = hash_;
    std::uint64_t stored = 0;
    unsigned char buf[8];
    in_.read(reinterpret_cast<char*>(buf), 8);
    if (in_.gcount() != 8) raise(errc::corrupt_model, "trailer missing");
    for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    if (stored != expected) raise(errc::corrupt_model, "checksum mismatch");
    in_.peek();
    if (!in_.eof()) raise(errc::corrupt_model, "trailing bytes after checksum");
  }

 private:
  template <typename T>
  T scalar() {
    unsigned char buf[sizeof(T)];
    bytes(buf, sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
  }

  std::ifstream in_;
  std::uint64_t hash_ = kFnvOffset;
};

constexpr char kModelMagic[8] = {'W', 'R', 'O', 'M', 'M', 'D', 'L', '1'};
constexpr char kEnsembleMagic[8] = {'W', 'R', 'O', 'M', 'E', 'N', 'S', '1'};
constexpr std::uint32_t kFormatVersion = 1;

inline void expect_array(HashedReader& reader, const std::string& expected_name,
                         std::vector<std::uint64_t>& dims, std::vector<double>& data) {
  std::string name;
  reader.array(name, dims, data);
  if (name != expected_name)
    raise(errc::corrupt_model, "expected array '" + expected_name + "', found '" + name + "'");
}

}  // namespace detail

/// Content hash of an ensemble, recorded in models built from it.
inline std::uint64_t ensemble_checksum(const VelocityEnsemble& ens) {
  std::uint64_t h = detail::kFnvOffset;
  const auto mix_doubles = [&h](const std::vector<double>& v) {
    detail::fnv1a_update(h, reinterpret_cast<const unsigned char*>(v.data()),
                         v.size() * sizeof(double));
  };
  mix_doubles(ens.grid.z_levels);
  const double meta[4] = {static_cast<double>(ens.n_realizations),
                          static_cast<double>(ens.n_intervals),
                          static_cast<double>(ens.grid.nx), ens.grid.interval_s};
  detail::fnv1a_update(h, reinterpret_cast<const unsigned char*>(meta), sizeof(meta));
  mix_doubles(ens.data);
  mix_doubles(ens.interval_dx);
  return h;
}

inline void write_model(const std::string& path, const ReducedModel& model) {
  model.validate();
  detail::HashedWriter writer(path);
  writer.bytes(detail::kModelMagic, sizeof(detail::kModelMagic));
  writer.u32(detail::kFormatVersion);

  const auto nz = static_cast<std::uint64_t>(model.grid.nz());
  const auto nx = static_cast<std::uint64_t>(model.grid.nx);
  const auto nt = static_cast<std::uint64_t>(model.n_intervals);
  const auto m = static_cast<std::uint64_t>(model.retained());
  writer.u32(static_cast<std::uint32_t>(nz));
  writer.u32(static_cast<std::uint32_t>(nx));
  writer.u32(static_cast<std::uint32_t>(nt));
  writer.u32(static_cast<std::uint32_t>(m));
  writer.f64(model.grid.interval_s);
  writer.f64(model.grid.dx);

  std::uint32_t array_count = 5 + 6 * static_cast<std::uint32_t>(m);
  if (model.temporal_covariance.size() > 0) ++array_count;
  writer.u32(array_count);

  writer.array("z_levels", {nz}, model.grid.z_levels.data());
  writer.array("mean_field", {nz * nx}, model.mean_field.data());
  {
    // row per mode so the layout is independent of Eigen's storage order
    Eigen::MatrixXd rows = model.temporal_modes.transpose();
    std::vector<double> flat(rows.size());
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
      for (Eigen::Index t = 0; t < rows.cols(); ++t)
        flat[static_cast<std::size_t>(i) * rows.cols() + t] = rows(i, t);
    writer.array("temporal_modes", {m, nt}, flat.data());
  }
  writer.array("bd_eigenvalues", {m}, model.bd_eigenvalues.data());
  writer.array("bd_spectrum", {static_cast<std::uint64_t>(model.bd_spectrum.size())},
               model.bd_spectrum.data());

  for (std::uint64_t i = 0; i < m; ++i) {
    const auto& mode = model.modes[i];
    const auto prefix = "mode" + std::to_string(i) + "_";
    const auto terms = static_cast<std::uint64_t>(mode.terms());
    writer.array(prefix + "mean", {nz * nx}, mode.mean.data());
    writer.array(prefix + "eigenvalues", {terms}, mode.eigenvalues.data());
    {
      std::vector<double> flat(static_cast<std::size_t>(terms) * nz * nx);
      for (std::uint64_t j = 0; j < terms; ++j)
        for (std::uint64_t p = 0; p < nz * nx; ++p)
          flat[j * nz * nx + p] = mode.basis(static_cast<Eigen::Index>(p),
                                             static_cast<Eigen::Index>(j));
      writer.array(prefix + "basis", {terms, nz * nx}, flat.data());
    }
    {
      const auto obs = static_cast<std::uint64_t>(
          terms > 0 ? mode.xi_pdfs.front().observations.size() : 0);
      std::vector<double> flat(static_cast<std::size_t>(terms) * obs);
      std::vector<double> h(terms), sigma(terms);
      for (std::uint64_t j = 0; j < terms; ++j) {
        const auto& kde = mode.xi_pdfs[j];
        if (kde.observations.size() != obs)
          raise(errc::shape_mismatch, "inconsistent observation counts in mode densities");
        for (std::uint64_t k = 0; k < obs; ++k) flat[j * obs + k] = kde.observations[k];
        h[j] = kde.bandwidth;
        sigma[j] = kde.sigma;
      }
      writer.array(prefix + "xi", {terms, obs}, flat.data());
      writer.array(prefix + "kde_h", {terms}, h.data());
      writer.array(prefix + "kde_sigma", {terms}, sigma.data());
    }
  }

  if (model.temporal_covariance.size() > 0) {
    const auto rows = static_cast<std::uint64_t>(model.temporal_covariance.rows());
    std::vector<double> flat(model.temporal_covariance.size());
    for (std::uint64_t r = 0; r < rows; ++r)
      for (std::uint64_t c = 0; c < rows; ++c)
        flat[r * rows + c] = model.temporal_covariance(static_cast<Eigen::Index>(r),
                                                       static_cast<Eigen::Index>(c));
    writer.array("temporal_covariance", {rows, rows}, flat.data());
  }

  writer.text(model.config_echo);
  writer.u64(model.source_checksum);
  writer.trailer();
}

inline ReducedModel read_model(const std::string& path) {
  detail::HashedReader reader(path);
  char magic[8];
  reader.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, detail::kModelMagic, sizeof(magic)) != 0)
    raise(errc::corrupt_model, "bad magic in " + path);
  const std::uint32_t version = reader.u32();
  if (version != detail::kFormatVersion)
    raise(errc::unsupported_version,
          "model format version " + std::to_string(version) + " is not supported");

  ReducedModel model;
  const std::uint32_t nz = reader.u32();
  const std::uint32_t nx = reader.u32();
  const std::uint32_t nt = reader.u32();
  const std::uint32_t m = reader.u32();
  model.grid.nx = static_cast<int>(nx);
  model.n_intervals = static_cast<int>(nt);
  model.grid.interval_s = reader.f64();
  model.grid.dx = reader.f64();
  const std::uint32_t array_count = reader.u32();
  if (array_count != 5 + 6 * m && array_count != 6 + 6 * m)
    raise(errc::corrupt_model, "array count out of range");

  std::vector<std::uint64_t> dims;
  std::vector<double> data;

  detail::expect_array(reader, "z_levels", dims, data);
  if (dims != std::vector<std::uint64_t>{nz}) raise(errc::corrupt_model, "z_levels shape");
  model.grid.z_levels = data;

  const std::uint64_t points = static_cast<std::uint64_t>(nz) * nx;
  detail::expect_array(reader, "mean_field", dims, data);
  if (dims != std::vector<std::uint64_t>{points}) raise(errc::corrupt_model, "mean_field shape");
  model.mean_field = Eigen::Map<const Eigen::VectorXd>(data.data(), data.size());

  detail::expect_array(reader, "temporal_modes", dims, data);
  if (dims != std::vector<std::uint64_t>{m, nt}) raise(errc::corrupt_model, "temporal_modes shape");
  model.temporal_modes.resize(nt, m);
  for (std::uint32_t i = 0; i < m; ++i)
    for (std::uint32_t t = 0; t < nt; ++t)
      model.temporal_modes(t, i) = data[static_cast<std::size_t>(i) * nt + t];

  detail::expect_array(reader, "bd_eigenvalues", dims, data);
  if (dims != std::vector<std::uint64_t>{m}) raise(errc::corrupt_model, "bd_eigenvalues shape");
  model.bd_eigenvalues = Eigen::Map<const Eigen::VectorXd>(data.data(), data.size());

  detail::expect_array(reader, "bd_spectrum", dims, data);
  if (dims.size() != 1) raise(errc::corrupt_model, "bd_spectrum shape");
  model.bd_spectrum = Eigen::Map<const Eigen::VectorXd>(data.data(), data.size());

  model.modes.resize(m);
  for (std::uint32_t i = 0; i < m; ++i) {
    auto& mode = model.modes[i];
    const auto prefix = "mode" + std::to_string(i) + "_";

    detail::expect_array(reader, prefix + "mean", dims, data);
    if (dims != std::vector<std::uint64_t>{points}) raise(errc::corrupt_model, "mode mean shape");
    mode.mean = Eigen::Map<const Eigen::VectorXd>(data.data(), data.size());

    detail::expect_array(reader, prefix + "eigenvalues", dims, data);
    if (dims.size() != 1) raise(errc::corrupt_model, "mode eigenvalue shape");
    mode.eigenvalues = Eigen::Map<const Eigen::VectorXd>(data.data(), data.size());
    const auto terms = static_cast<std::uint64_t>(mode.eigenvalues.size());

    detail::expect_array(reader, prefix + "basis", dims, data);
    if (dims != std::vector<std::uint64_t>{terms, points})
      raise(errc::corrupt_model, "mode basis shape");
    mode.basis.resize(points, terms);
    for (std::uint64_t j = 0; j < terms; ++j)
      for (std::uint64_t p = 0; p < points; ++p)
        mode.basis(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) =
            data[j * points + p];

    detail::expect_array(reader, prefix + "xi", dims, data);
    if (dims.size() != 2 || dims[0] != terms) raise(errc::corrupt_model, "mode xi shape");
    const std::uint64_t obs = dims[1];

    std::vector<std::uint64_t> h_dims, sigma_dims;
    std::vector<double> h_data, sigma_data;
    detail::expect_array(reader, prefix + "kde_h", h_dims, h_data);
    detail::expect_array(reader, prefix + "kde_sigma", sigma_dims, sigma_data);
    if (h_data.size() < terms || sigma_data.size() < terms)
      raise(errc::corrupt_model, "kde parameter shape");

    mode.xi_pdfs.resize(terms);
    for (std::uint64_t j = 0; j < terms; ++j) {
      auto& kde = mode.xi_pdfs[j];
      kde.observations.assign(data.begin() + static_cast<std::ptrdiff_t>(j * obs),
                              data.begin() + static_cast<std::ptrdiff_t>((j + 1) * obs));
      kde.bandwidth = h_data[j];
      kde.sigma = sigma_data[j];
    }
  }

  if (array_count > 5 + 6 * m) {
    detail::expect_array(reader, "temporal_covariance", dims, data);
    if (dims.size() != 2 || dims[0] != dims[1])
      raise(errc::corrupt_model, "temporal_covariance shape");
    const auto rows = static_cast<Eigen::Index>(dims[0]);
    model.temporal_covariance.resize(rows, rows);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < rows; ++c)
        model.temporal_covariance(r, c) = data[static_cast<std::size_t>(r) * rows + c];
  }

  model.config_echo = reader.text(1 << 16);
  model.source_checksum = reader.u64();
  reader.check_trailer();
  model.validate();
  return model;
}

inline void write_ensemble_file(const std::string& path, const VelocityEnsemble& ens) {
  ens.validate();
  detail::HashedWriter writer(path);
  writer.bytes(detail::kEnsembleMagic, sizeof(detail::kEnsembleMagic));
  writer.u32(detail::kFormatVersion);
  const auto nr = static_cast<std::uint64_t>(ens.n_realizations);
  const auto nt = static_cast<std::uint64_t>(ens.n_intervals);
  const auto nz = static_cast<std::uint64_t>(ens.grid.nz());
  const auto nx = static_cast<std::uint64_t>(ens.grid.nx);
  writer.u32(static_cast<std::uint32_t>(nr));
  writer.u32(static_cast<std::uint32_t>(nt));
  writer.u32(static_cast<std::uint32_t>(nz));
  writer.u32(static_cast<std::uint32_t>(nx));
  writer.f64(ens.grid.interval_s);
  writer.f64(ens.grid.dx);
  writer.u32(3);
  writer.array("z_levels", {nz}, ens.grid.z_levels.data());
  writer.array("interval_dx", {nr, nt}, ens.interval_dx.data());
  writer.array("data", {nr, nt, nz, nx}, ens.data.data());
  writer.trailer();
}

inline VelocityEnsemble read_ensemble_file(const std::string& path) {
  detail::HashedReader reader(path);
  char magic[8];
  reader.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, detail::kEnsembleMagic, sizeof(magic)) != 0)
    raise(errc::corrupt_model, "bad magic in " + path);
  const std::uint32_t version = reader.u32();
  if (version != detail::kFormatVersion)
    raise(errc::unsupported_version,
          "ensemble format version " + std::to_string(version) + " is not supported");

  VelocityEnsemble ens;
  const std::uint32_t nr = reader.u32();
  const std::uint32_t nt = reader.u32();
  const std::uint32_t nz = reader.u32();
  const std::uint32_t nx = reader.u32();
  ens.n_realizations = static_cast<int>(nr);
  ens.n_intervals = static_cast<int>(nt);
  ens.grid.nx = static_cast<int>(nx);
  ens.grid.interval_s = reader.f64();
  ens.grid.dx = reader.f64();
  if (reader.u32() != 3) raise(errc::corrupt_model, "array count out of range");

  std::vector<std::uint64_t> dims;
  std::vector<double> data;
  detail::expect_array(reader, "z_levels", dims, data);
  if (dims != std::vector<std::uint64_t>{nz}) raise(errc::corrupt_model, "z_levels shape");
  ens.grid.z_levels = data;

  detail::expect_array(reader, "interval_dx", dims, data);
  if (dims != std::vector<std::uint64_t>{nr, nt}) raise(errc::corrupt_model, "interval_dx shape");
  ens.interval_dx = data;

  detail::expect_array(reader, "data", dims, data);
  if (dims != std::vector<std::uint64_t>{nr, nt, nz, nx})
    raise(errc::corrupt_model, "data shape");
  ens.data = std::move(data);

  reader.check_trailer();
  ens.validate();
  return ens;
}

}  // namespace windrom
