#pragma once

#include <cstdint>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "clarity/common.hpp"

namespace clarity {

// Dense row-major value carrier used at serialization boundaries. In-memory
// math runs on RealMat; Tensor keeps the shape header explicit.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t numel() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  void validate() const {
    if (numel() != values.size()) {
      throw std::invalid_argument("Tensor: shape/buffer length mismatch");
    }
  }

  static Tensor from_mat(const RealMat& m) {
    Tensor t;
    t.shape = {m.rows(), m.cols()};
    t.values = m.data();
    return t;
  }

  RealMat to_mat() const {
    validate();
    if (shape.size() != 2) throw std::invalid_argument("Tensor: expected rank 2");
    RealMat m(shape[0], shape[1]);
    m.data() = values;
    return m;
  }
};

namespace detail {

inline void put_f32le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u32le(out, bits);
}

}  // namespace detail

// Named-tensor wire format: u32 name length, name bytes, u32 rank,
// u32 dims, then float32 little-endian values.
inline void append_named_tensor(std::string& out, const std::string& name, const Tensor& t) {
  t.validate();
  if (name.empty()) throw std::invalid_argument("append_named_tensor: empty name");
  detail::put_u32le(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  detail::put_u32le(out, static_cast<std::uint32_t>(t.shape.size()));
  for (std::size_t d : t.shape) detail::put_u32le(out, static_cast<std::uint32_t>(d));
  for (double v : t.values) detail::put_f32le(out, static_cast<float>(v));
}

// Sequential reader over a byte range; throws FormatError on malformed input
// before any partial tensor escapes.
class TensorReader {
 public:
  TensorReader(const unsigned char* begin, const unsigned char* end, std::string context)
      : p_(begin), end_(end), context_(std::move(context)) {}

  bool at_end() const { return p_ == end_; }
  const unsigned char* position() const { return p_; }

  bool next(std::string& name, Tensor& t) {
    if (p_ == end_) return false;
    const std::uint32_t name_len = take_u32("tensor name length");
    if (name_len == 0 || name_len > 4096) {
      throw FormatError(context_ + ": implausible tensor name length");
    }
    need(name_len, "tensor name");
    name.assign(reinterpret_cast<const char*>(p_), name_len);
    p_ += name_len;
    const std::uint32_t rank = take_u32("tensor rank");
    if (rank == 0 || rank > 8) throw FormatError(context_ + ": implausible tensor rank");
    t.shape.resize(rank);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      t.shape[i] = take_u32("tensor dim");
      if (t.shape[i] == 0 || t.shape[i] > (1u << 24)) {
        throw FormatError(context_ + ": implausible tensor dimension");
      }
      numel *= t.shape[i];
    }
    need(numel * 4, "tensor values");
    t.values.resize(numel);
    for (std::size_t i = 0; i < numel; ++i) {
      std::uint32_t bits = static_cast<std::uint32_t>(p_[0]) |
                           (static_cast<std::uint32_t>(p_[1]) << 8) |
                           (static_cast<std::uint32_t>(p_[2]) << 16) |
                           (static_cast<std::uint32_t>(p_[3]) << 24);
      float f;
      std::memcpy(&f, &bits, sizeof f);
      t.values[i] = static_cast<double>(f);
      p_ += 4;
    }
    return true;
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (static_cast<std::size_t>(end_ - p_) < n) {
      throw FormatError(context_ + ": truncated reading " + what);
    }
  }

  std::uint32_t take_u32(const char* what) {
    need(4, what);
    std::uint32_t v = static_cast<std::uint32_t>(p_[0]) |
                      (static_cast<std::uint32_t>(p_[1]) << 8) |
                      (static_cast<std::uint32_t>(p_[2]) << 16) |
                      (static_cast<std::uint32_t>(p_[3]) << 24);
    p_ += 4;
    return v;
  }

  const unsigned char* p_;
  const unsigned char* end_;
  std::string context_;
};

}  // namespace clarity
