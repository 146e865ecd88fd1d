#include "hncf/image_io.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "hncf/error.hpp"

namespace hncf {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const std::string& name) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) fail(ErrorKind::DecodeError, name + ": truncated PPM header");
  return tok;
}

std::size_t header_number(std::istream& in, const std::string& name) {
  const std::string tok = header_token(in, name);
  try {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::logic_error&) {
    fail(ErrorKind::DecodeError, name + ": bad PPM header field '" + tok + "'");
  }
}

}  // namespace

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::FileNotFound, "image " + path.string());
  const std::string name = path.string();
  if (header_token(in, name) != "P6") fail(ErrorKind::DecodeError, name + ": not a binary PPM (P6)");
  RgbImage img;
  img.width = header_number(in, name);
  img.height = header_number(in, name);
  const std::size_t maxval = header_number(in, name);
  if (img.width == 0 || img.height == 0) fail(ErrorKind::DecodeError, name + ": empty image");
  if (maxval != 255) fail(ErrorKind::DecodeError, name + ": only 8-bit PPM (maxval 255) is supported");
  img.pixels.resize(img.width * img.height * 3);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) {
    fail(ErrorKind::DecodeError, name + ": truncated pixel data");
  }
  return img;
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) fail(ErrorKind::IoError, "failed writing " + path.string());
}

Tensor image_to_tensor(const RgbImage& image, std::size_t height, std::size_t width) {
  std::vector<double> v(height * width * 3);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = y * image.height / height;
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = x * image.width / width;
      for (std::size_t c = 0; c < 3; ++c) {
        v[(y * width + x) * 3 + c] = static_cast<double>(image.at(sy, sx, c)) / 255.0;
      }
    }
  }
  return Tensor({height, width, 3}, std::move(v));
}

}  // namespace hncf
