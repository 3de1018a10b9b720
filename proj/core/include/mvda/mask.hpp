#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvda {

// Binary H x W pixel mask, row-major, values 0/1.
struct Mask {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int height, int width)
      : h(height), w(width), data(static_cast<std::size_t>(height) * width, 0) {}

  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
  void set(int y, int x, std::uint8_t v) { data[static_cast<std::size_t>(y) * w + x] = v; }
  std::size_t size() const { return data.size(); }

  std::size_t count() const {
    std::size_t n = 0;
    for (std::uint8_t v : data) n += v ? 1 : 0;
    return n;
  }

  bool same_shape(const Mask& o) const { return h == o.h && w == o.w; }
  bool operator==(const Mask& o) const = default;
};

inline void require_same_shape(const Mask& a, const Mask& b, const std::string& what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(what + ": mask shapes disagree (" + std::to_string(a.h) + "x" +
                                std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" +
                                std::to_string(b.w) + ")");
}

}  // namespace mvda
