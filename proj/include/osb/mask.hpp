#pragma once

#include <cstdint>
#include <vector>

namespace osb {

// Dense binary mask, row-major, one byte per pixel (0 or 1).
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;  // size == height * width

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), bits(size_t(h) * w, 0) {}

  std::uint8_t at(int r, int c) const { return bits[size_t(r) * width + c]; }
  void set(int r, int c, std::uint8_t v) { bits[size_t(r) * width + c] = v; }

  bool operator==(const BinaryMask& o) const = default;
};

// Column-major run-length encoding. Runs alternate between zeros and ones,
// starting with zeros; the leading zero-run may have length 0 when the mask
// starts with a one. Canonical form has no other zero-length runs.
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  bool operator==(const RleMask& o) const = default;
};

// Expands an RLE into a dense mask. Throws ParseError when the run lengths
// do not sum to height*width.
BinaryMask rle_decode(const RleMask& m);

// Encodes a dense mask in canonical RLE form; rle_decode(rle_encode(m)) == m.
RleMask rle_encode(const BinaryMask& m);

// Number of set pixels, straight from the run lengths.
std::int64_t rle_area(const RleMask& m);

// Fills pixels whose center (c + 0.5, r + 0.5) lies inside any of the given
// closed polygons under the even-odd rule. Polygons are flat x0,y0,x1,y1,...
// lists in pixel coordinates; each needs at least 3 vertices.
BinaryMask polygon_rasterize(const std::vector<std::vector<double>>& polygons,
                             int height, int width);

// Rigid translation by whole pixels; bits shifted outside the frame are lost.
BinaryMask translate_mask(const BinaryMask& m, int dx, int dy);

}  // namespace osb
