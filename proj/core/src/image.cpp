#include "cagnet/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cagnet/ops.hpp"

namespace cagnet {

namespace {

// Byte-walking PNM header reader; every failure names the position.
struct Cursor {
  const std::vector<std::uint8_t>& bytes;
  const std::string& origin;
  std::size_t off = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument(origin + ": byte " + std::to_string(off) +
                                ": " + what);
  }
  bool eof() const { return off >= bytes.size(); }
  std::uint8_t peek() const {
    if (eof()) fail("unexpected end of file");
    return bytes[off];
  }
  std::uint8_t get() {
    const std::uint8_t b = peek();
    ++off;
    return b;
  }

  static bool is_space(std::uint8_t b) {
    return b == ' ' || b == '\t' || b == '\r' || b == '\n';
  }

  void skip_separators() {
    while (!eof()) {
      if (is_space(peek())) {
        ++off;
      } else if (peek() == '#') {
        while (!eof() && get() != '\n') {
        }
      } else {
        return;
      }
    }
  }

  int read_uint(const char* what, int max) {
    skip_separators();
    if (eof()) fail(std::string("missing ") + what);
    if (peek() < '0' || peek() > '9')
      fail(std::string("expected digit in ") + what);
    long v = 0;
    while (!eof() && peek() >= '0' && peek() <= '9') {
      v = v * 10 + (get() - '0');
      if (v > max) fail(std::string(what) + " exceeds " + std::to_string(max));
    }
    return static_cast<int>(v);
  }
};

double reflect_coord(double t, int n) {
  if (n <= 1) return 0.0;
  const double period = 2.0 * (n - 1);
  t = std::fmod(t, period);
  if (t < 0.0) t += period;
  return t <= (n - 1) ? t : period - t;
}

// Bilinear fetch at a real-valued position with mirrored borders.
double sample_reflect(const ImageU8& img, double y, double x, int c) {
  y = reflect_coord(y, img.h);
  x = reflect_coord(x, img.w);
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, img.h - 1);
  const int x1 = std::min(x0 + 1, img.w - 1);
  const double fy = y - y0, fx = x - x0;
  return (1.0 - fy) * ((1.0 - fx) * img.at(y0, x0, c) +
                       fx * img.at(y0, x1, c)) +
         fy * ((1.0 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c));
}

std::uint8_t to_byte(double v) {
  const double r = std::round(v);
  if (r <= 0.0) return 0;
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

}  // namespace

ImageU8 make_image(int channels, int h, int w) {
  check(channels == 1 || channels == 3, "images carry 1 or 3 channels");
  check(h >= 1 && w >= 1, "image extents must be positive");
  ImageU8 img;
  img.channels = channels;
  img.h = h;
  img.w = w;
  img.pix.assign(static_cast<std::size_t>(h) * w * channels, 0);
  return img;
}

ImageU8 decode_pnm(const std::vector<std::uint8_t>& bytes,
                   const std::string& origin) {
  Cursor cur{bytes, origin};
  if (bytes.size() < 2 || bytes[0] != 'P') cur.fail("not a PNM file");
  cur.off = 1;
  const std::uint8_t kind = cur.get();
  int channels;
  if (kind == '5')
    channels = 1;
  else if (kind == '6')
    channels = 3;
  else
    cur.fail("only binary P5/P6 are supported");

  const int w = cur.read_uint("width", 1 << 20);
  const int h = cur.read_uint("height", 1 << 20);
  if (w < 1 || h < 1) cur.fail("image extents must be positive");
  const int maxval = cur.read_uint("maxval", 1 << 20);
  if (maxval != 255) cur.fail("maxval must be 255");
  // Exactly one separator byte between the header and the raster.
  if (cur.eof()) cur.fail("missing raster");
  if (!Cursor::is_space(cur.peek())) cur.fail("expected whitespace after maxval");
  cur.get();

  ImageU8 img = make_image(channels, h, w);
  if (bytes.size() - cur.off < img.pix.size()) {
    cur.off = bytes.size();
    cur.fail("raster truncated: need " + std::to_string(img.pix.size()) +
             " bytes");
  }
  std::copy_n(bytes.begin() + cur.off, img.pix.size(), img.pix.begin());
  return img;
}

ImageU8 read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_pnm(bytes, path);
}

std::vector<std::uint8_t> encode_pnm(const ImageU8& img) {
  check(img.channels == 1 || img.channels == 3,
        "images carry 1 or 3 channels");
  const std::string header = std::string(img.channels == 1 ? "P5" : "P6") +
                             "\n" + std::to_string(img.w) + " " +
                             std::to_string(img.h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pix.begin(), img.pix.end());
  return out;
}

void write_pnm(const ImageU8& img, const std::string& path) {
  const std::vector<std::uint8_t> bytes = encode_pnm(img);
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  check(out.good(), "short write to " + path);
}

Tensor image_to_tensor(const ImageU8& img) {
  Tensor t(Shape(1, img.channels, img.h, img.w));
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x)
        t.at(0, c, y, x) = img.at(y, x, c) / 255.0;
  return t;
}

Tensor mask_to_tensor(const ImageU8& img) {
  check(img.channels == 1, "masks must be greyscale");
  Tensor t(Shape(1, 1, img.h, img.w));
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      t.at(0, 0, y, x) = img.at(y, x) >= 128 ? 1.0 : 0.0;
  return t;
}

ImageU8 tensor_to_image(const Tensor& t) {
  const Shape& s = t.shape();
  check(s.n == 1 && (s.c == 1 || s.c == 3),
        "expected a single 1- or 3-channel image, got " + s.str());
  ImageU8 img = make_image(s.c, s.h, s.w);
  for (int c = 0; c < s.c; ++c)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x)
        img.at(y, x, c) = to_byte(t.at(0, c, y, x) * 255.0);
  return img;
}

ImageU8 resize_image(const ImageU8& img, int oh, int ow) {
  const Tensor resized = resize_bilinear(image_to_tensor(img), oh, ow);
  ImageU8 out = make_image(img.channels, oh, ow);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        out.at(y, x, c) = to_byte(resized.at(0, c, y, x) * 255.0);
  return out;
}

ImageU8 binarize_mask(const ImageU8& mask, int threshold) {
  check(mask.channels == 1, "masks must be greyscale");
  ImageU8 out = mask;
  for (auto& p : out.pix) p = p >= threshold ? 255 : 0;
  return out;
}

ImageU8 flip_horizontal(const ImageU8& img) {
  ImageU8 out = make_image(img.channels, img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
  return out;
}

ImageU8 rotate_image(const ImageU8& img, double degrees) {
  const double rad = degrees * M_PI / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cy = (img.h - 1) / 2.0, cx = (img.w - 1) / 2.0;
  ImageU8 out = make_image(img.channels, img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      // Inverse mapping: where does this output pixel come from?
      const double dy = y - cy, dx = x - cx;
      const double sy = cy + cs * dy - sn * dx;
      const double sx = cx + sn * dy + cs * dx;
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = to_byte(sample_reflect(img, sy, sx, c));
    }
  return out;
}

SamplePair augment(const SamplePair& in, Rng& rng) {
  check(in.image.h == in.mask.h && in.image.w == in.mask.w,
        "augment: image and mask sizes differ for " + in.stem);
  SamplePair out = in;
  if (rng.uniform() < 0.5) {
    out.image = flip_horizontal(out.image);
    out.mask = flip_horizontal(out.mask);
  }
  const double magnitude = rng.uniform(0.0, 12.0);
  const double angle = rng.coin() ? magnitude : -magnitude;
  out.image = rotate_image(out.image, angle);
  out.mask = binarize_mask(rotate_image(out.mask, angle));
  return out;
}

}  // namespace cagnet
