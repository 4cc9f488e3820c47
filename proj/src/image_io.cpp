#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "ffcnet/dataset.hpp"

namespace ffcnet {

Tensor<double> read_image(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw FormatError(path.string() + ": cannot decode image (" + img.message + ")");
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw FormatError(path.string() + ": cannot decode image (" + msg + ")");
  }
  const std::size_t C = color ? 3 : 1, H = img.height, W = img.width;
  Tensor<double> out(Shape{C, H, W});
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < C; ++c) {
        out[(c * H + y) * W + x] = buffer[(y * W + x) * C + c] / 255.0;
      }
    }
  }
  return out;
}

void write_image(const std::filesystem::path& path, const Tensor<double>& image) {
  const Shape& s = image.shape();
  if (s.rank() != 3 || (s[0] != 1 && s[0] != 3)) {
    throw ShapeError("write_image expects (1|3, H, W), got " + s.to_string());
  }
  const std::size_t C = s[0], H = s[1], W = s[2];
  std::vector<png_byte> buffer(C * H * W);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < C; ++c) {
        const double v = std::clamp(image[(c * H + y) * W + x], 0.0, 1.0);
        buffer[(y * W + x) * C + c] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    }
  }
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(W);
  img.height = static_cast<png_uint_32>(H);
  img.format = C == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw FormatError(path.string() + ": cannot write image (" + img.message + ")");
  }
}

Tensor<double> resize_bilinear(const Tensor<double>& image, std::size_t height, std::size_t width) {
  const Shape& s = image.shape();
  if (s.rank() != 3) throw ShapeError("resize expects (C, H, W), got " + s.to_string());
  const std::size_t C = s[0], H = s[1], W = s[2];
  if (H == height && W == width) return image;
  Tensor<double> out(Shape{C, height, width});
  const double sy = static_cast<double>(H) / static_cast<double>(height);
  const double sx = static_cast<double>(W) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(H - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, H - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(W - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, W - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < C; ++c) {
        const double* p = image.data().data() + c * H * W;
        const double top = p[y0 * W + x0] * (1 - wx) + p[y0 * W + x1] * wx;
        const double bottom = p[y1 * W + x0] * (1 - wx) + p[y1 * W + x1] * wx;
        out[(c * height + y) * width + x] = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

}  // namespace ffcnet
