#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "ayrl/errors.hpp"

namespace ayrl::io {

inline void put_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

inline void get_bytes(std::istream& in, void* data, std::size_t n) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (!in) throw UsageError("binary read: truncated stream");
}

template <typename T>
void put_pod(std::ostream& out, const T& value) {
  put_bytes(out, &value, sizeof(T));
}

template <typename T>
T get_pod(std::istream& in) {
  T value;
  get_bytes(in, &value, sizeof(T));
  return value;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put_pod<std::uint64_t>(out, s.size());
  put_bytes(out, s.data(), s.size());
}

inline std::string get_string(std::istream& in) {
  auto n = get_pod<std::uint64_t>(in);
  std::string s(n, '\0');
  if (n > 0) get_bytes(in, s.data(), n);
  return s;
}

inline void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  put_pod<std::int64_t>(out, m.rows());
  put_pod<std::int64_t>(out, m.cols());
  // row-major on disk
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_pod<double>(out, m(r, c));
}

inline Eigen::MatrixXd get_matrix(std::istream& in) {
  auto rows = get_pod<std::int64_t>(in);
  auto cols = get_pod<std::int64_t>(in);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get_pod<double>(in);
  return m;
}

inline void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
  put_pod<std::int64_t>(out, v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) put_pod<double>(out, v[i]);
}

inline Eigen::VectorXd get_vector(std::istream& in) {
  auto n = get_pod<std::int64_t>(in);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = get_pod<double>(in);
  return v;
}

inline void expect_magic(std::istream& in, const std::string& magic) {
  std::string seen(magic.size(), '\0');
  get_bytes(in, seen.data(), seen.size());
  if (seen != magic) throw ConfigError("bad file magic: expected '" + magic + "', got '" + seen + "'");
}

inline void put_magic(std::ostream& out, const std::string& magic) {
  put_bytes(out, magic.data(), magic.size());
}

}  // namespace ayrl::io
