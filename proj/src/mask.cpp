#include "osb/mask.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "osb/errors.hpp"

namespace osb {

BinaryMask rle_decode(const RleMask& m) {
  std::int64_t total = 0;
  for (std::uint32_t c : m.counts) total += c;
  if (total != std::int64_t(m.height) * m.width) {
    throw ParseError("rle_decode: run lengths sum to " + std::to_string(total) +
                     ", expected " + std::to_string(std::int64_t(m.height) * m.width));
  }
  BinaryMask out(m.height, m.width);
  std::uint8_t value = 0;
  std::int64_t cell = 0;  // column-major cell index
  for (std::uint32_t run : m.counts) {
    if (value) {
      for (std::uint32_t k = 0; k < run; ++k) {
        const std::int64_t idx = cell + k;
        const int col = int(idx / m.height);
        const int row = int(idx % m.height);
        out.set(row, col, 1);
      }
    }
    cell += run;
    value = !value;
  }
  return out;
}

RleMask rle_encode(const BinaryMask& m) {
  RleMask out;
  out.height = m.height;
  out.width = m.width;
  std::uint8_t value = 0;
  std::uint32_t run = 0;
  for (int c = 0; c < m.width; ++c) {
    for (int r = 0; r < m.height; ++r) {
      const std::uint8_t bit = m.at(r, c) ? 1 : 0;
      if (bit != value) {
        out.counts.push_back(run);
        run = 0;
        value = bit;
      }
      ++run;
    }
  }
  if (run > 0 || out.counts.empty()) out.counts.push_back(run);
  return out;
}

std::int64_t rle_area(const RleMask& m) {
  // Runs alternate starting with zeros, so odd indices hold the one-runs.
  std::int64_t area = 0;
  for (size_t i = 1; i < m.counts.size(); i += 2) area += m.counts[i];
  return area;
}

namespace {

// Crossing x positions of polygon edges with the horizontal line y, using
// half-open [ymin, ymax) spans so shared vertices are counted once.
void edge_crossings(const std::vector<double>& poly, double y,
                    std::vector<double>& xs) {
  const size_t n = poly.size() / 2;
  for (size_t i = 0; i < n; ++i) {
    const double x1 = poly[2 * i], y1 = poly[2 * i + 1];
    const size_t j = (i + 1) % n;
    const double x2 = poly[2 * j], y2 = poly[2 * j + 1];
    if (y1 == y2) continue;
    const double ymin = std::min(y1, y2), ymax = std::max(y1, y2);
    if (y < ymin || y >= ymax) continue;
    xs.push_back(x1 + (y - y1) * (x2 - x1) / (y2 - y1));
  }
}

}  // namespace

BinaryMask polygon_rasterize(const std::vector<std::vector<double>>& polygons,
                             int height, int width) {
  for (const auto& p : polygons) {
    if (p.size() < 6 || p.size() % 2 != 0) {
      throw ParseError("polygon_rasterize: polygon needs at least 3 (x,y) vertices");
    }
  }
  BinaryMask out(height, width);
  std::vector<double> xs;
  for (const auto& poly : polygons) {
    for (int r = 0; r < height; ++r) {
      const double y = r + 0.5;
      xs.clear();
      edge_crossings(poly, y, xs);
      std::sort(xs.begin(), xs.end());
      // Pixel center x is inside when an odd number of crossings lie
      // strictly to its right, i.e. within half-open spans [xs[2i], xs[2i+1]).
      for (size_t i = 0; i + 1 < xs.size(); i += 2) {
        int c0 = int(std::ceil(xs[i] - 0.5));
        int c1 = int(std::ceil(xs[i + 1] - 0.5)) - 1;
        c0 = std::max(c0, 0);
        c1 = std::min(c1, width - 1);
        for (int c = c0; c <= c1; ++c) out.set(r, c, 1);
      }
    }
  }
  return out;
}

BinaryMask translate_mask(const BinaryMask& m, int dx, int dy) {
  BinaryMask out(m.height, m.width);
  for (int r = 0; r < m.height; ++r) {
    const int nr = r + dy;
    if (nr < 0 || nr >= m.height) continue;
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      const int nc = c + dx;
      if (nc < 0 || nc >= m.width) continue;
      out.set(nr, nc, 1);
    }
  }
  return out;
}

}  // namespace osb
