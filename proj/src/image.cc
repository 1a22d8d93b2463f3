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

#include "brm/image.h"

#include <cctype>
#include <fstream>
#include <string>
#include <utility>

#include "brm/errors.h"

namespace brm {

Image::Image(int width, int height, int channels)
    : Image(width, height, channels,
            std::vector<uint8_t>(static_cast<std::size_t>(width) * height * channels)) {}

Image::Image(int width, int height, int channels, std::vector<uint8_t> samples)
    : width_(width), height_(height), channels_(channels), samples_(std::move(samples)) {
  if (width <= 0 || height <= 0) throw GeometryError("image dimensions must be positive");
  if (channels != 1 && channels != 3) throw GeometryError("image must have 1 or 3 channels");
  if (samples_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw GeometryError("sample count does not match image geometry");
  }
}

namespace {

void SkipWhitespaceAndComments(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == EOF) return;
    if (c == '#') {
      std::string discard;
      std::getline(in, discard);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

int ReadHeaderInt(std::istream& in, const char* field) {
  SkipWhitespaceAndComments(in);
  std::string digits;
  while (std::isdigit(in.peek())) digits.push_back(static_cast<char>(in.get()));
  if (digits.empty() || digits.size() > 9) {
    throw ParseError(std::string("netpbm: bad ") + field);
  }
  return std::stoi(digits);
}

}  // namespace

Image read_netpbm(std::istream& in) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw ParseError("netpbm: expected P5 or P6 magic");
  }
  const int channels = magic[1] == '5' ? 1 : 3;
  const int width = ReadHeaderInt(in, "width");
  const int height = ReadHeaderInt(in, "height");
  const int maxval = ReadHeaderInt(in, "maxval");
  if (width <= 0 || height <= 0) throw ParseError("netpbm: zero dimension");
  if (maxval != 255) throw ParseError("netpbm: only maxval 255 is supported");
  // Exactly one whitespace byte separates the header from the raster.
  if (!std::isspace(in.get())) throw ParseError("netpbm: missing raster separator");

  std::vector<uint8_t> samples(static_cast<std::size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(samples.data()),
          static_cast<std::streamsize>(samples.size()));
  if (in.gcount() != static_cast<std::streamsize>(samples.size())) {
    throw ParseError("netpbm: truncated raster");
  }
  return Image(width, height, channels, std::move(samples));
}

Image read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_netpbm(in);
}

void write_netpbm(std::ostream& out, const Image& image) {
  out << (image.channels() == 1 ? "P5" : "P6") << '\n'
      << image.width() << ' ' << image.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.samples().data()),
            static_cast<std::streamsize>(image.samples().size()));
}

void write_netpbm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_netpbm(out, image);
}

double mean_squared_error(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels()) {
    throw GeometryError("mean_squared_error: geometry mismatch");
  }
  const auto& sa = a.samples();
  const auto& sb = b.samples();
  double sum = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double d = static_cast<double>(sa[i]) - static_cast<double>(sb[i]);
    sum += d * d;
  }
  return sa.empty() ? 0.0 : sum / static_cast<double>(sa.size());
}

}  // namespace brm
