// Copyright (c) the BRM Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BRM_IMAGE_H_
#define BRM_IMAGE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <vector>

namespace brm {

// 8-bit image, samples row-major with channels interleaved.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels);
  Image(int width, int height, int channels, std::vector<uint8_t> samples);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixelCount() const {
    return static_cast<std::size_t>(width_) * height_;
  }

  uint8_t& at(int x, int y, int c) {
    return samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  uint8_t at(int x, int y, int c) const {
    return samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  const std::vector<uint8_t>& samples() const { return samples_; }
  std::vector<uint8_t>& samples() { return samples_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<uint8_t> samples_;
};

// Binary Netpbm: P5 (1 channel) and P6 (3 channels), maxval 255 only.
Image read_netpbm(std::istream& in);
Image read_netpbm(const std::filesystem::path& path);
void write_netpbm(std::ostream& out, const Image& image);
void write_netpbm(const std::filesystem::path& path, const Image& image);

// Mean squared error over all samples; images must share geometry.
double mean_squared_error(const Image& a, const Image& b);

}  // namespace brm

#endif  // BRM_IMAGE_H_
