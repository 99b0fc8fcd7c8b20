#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <type_traits>
#include <vector>

#include "mra/errors.hpp"
#include "mra/kernel.hpp"

namespace mra::wire {

/// Appends trivially copyable values and Eigen objects to a byte string.
class Writer {
 public:
  template <class T>
    requires std::is_trivially_copyable_v<T>
  void put(const T& value) {
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.append(p, sizeof(T));
  }
  void put(const Matrix& m) {
    put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    bytes_.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  void put(const Vector& v) {
    put<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
    bytes_.append(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(double));
  }
  template <class T>
    requires std::is_trivially_copyable_v<T>
  void put(const std::vector<T>& values) {
    put<std::uint64_t>(values.size());
    bytes_.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(T));
  }
  void put(const std::string& s) {
    put<std::uint64_t>(s.size());
    bytes_.append(s);
  }

  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
    requires std::is_trivially_copyable_v<T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)), sizeof(T));
    return value;
  }
  Matrix matrix() {
    const auto rows = static_cast<Eigen::Index>(get<std::uint64_t>());
    const auto cols = static_cast<Eigen::Index>(get<std::uint64_t>());
    Matrix m(rows, cols);
    std::memcpy(m.data(), take(static_cast<std::size_t>(m.size()) * sizeof(double)),
                static_cast<std::size_t>(m.size()) * sizeof(double));
    return m;
  }
  Vector vector() {
    const auto n = static_cast<Eigen::Index>(get<std::uint64_t>());
    Vector v(n);
    std::memcpy(v.data(), take(static_cast<std::size_t>(n) * sizeof(double)),
                static_cast<std::size_t>(n) * sizeof(double));
    return v;
  }
  template <class T>
  std::vector<T> list() {
    const auto n = get<std::uint64_t>();
    std::vector<T> out(n);
    std::memcpy(out.data(), take(n * sizeof(T)), n * sizeof(T));
    return out;
  }
  std::string string() {
    const auto n = get<std::uint64_t>();
    return std::string(take(n), n);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const char* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw TransportError("truncated message payload");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace mra::wire
