// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdanet/tensor.hpp"

namespace pdanet {

// 8-bit RGB image, row-major, 3 bytes per pixel.
struct ImageU8 {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> pixels;  // height*width*3

  uint8_t& at(int y, int x, int c) { return pixels[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
};

// Maps [-1,1] doubles to [0,255] with round-half-to-even; values outside the
// range are clamped first.
uint8_t quantize_unit(double v);
double dequantize_unit(uint8_t b);

// chw: [3,H,W] in [-1,1]  <->  8-bit RGB.
ImageU8 to_u8(const Tensor& chw);
Tensor from_u8(const ImageU8& img);

void write_png(const std::string& path, const ImageU8& img);
ImageU8 read_png(const std::string& path);

}  // namespace pdanet
