#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cagnet/data.hpp"

namespace cagnet {

namespace {

struct Ellipse {
  double cy, cx, ry, rx;
  bool contains(double y, double x) const {
    const double dy = (y - cy) / ry, dx = (x - cx) / rx;
    return dy * dy + dx * dx <= 1.0;
  }
};

std::array<int, 3> random_bright(Rng& rng) {
  // Either near-white or one saturated channel: both pop against the
  // muted background palette.
  std::array<int, 3> c{};
  if (rng.coin()) {
    for (auto& v : c) v = 200 + static_cast<int>(rng.below(56));
  } else {
    const int hot = static_cast<int>(rng.below(3));
    for (int i = 0; i < 3; ++i)
      c[i] = i == hot ? 215 + static_cast<int>(rng.below(41))
                      : static_cast<int>(rng.below(45));
  }
  return c;
}

int contrast(const std::array<int, 3>& a, const std::array<int, 3>& b) {
  return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
}

}  // namespace

void synth_dataset(const std::string& root, int count, int size,
                   std::uint64_t seed) {
  check(count >= 1, "sample count must be positive");
  check(size >= 32, "scene size must be at least 32");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(root) / "images");
  fs::create_directories(fs::path(root) / "masks");

  const Rng base_rng(seed);
  for (int idx = 0; idx < count; ++idx) {
    Rng rng = base_rng.split(static_cast<std::uint64_t>(idx));
    const int s = size;

    // Muted background: flat colour + two low-frequency waves + grain.
    std::array<int, 3> bg{};
    for (auto& v : bg) v = 40 + static_cast<int>(rng.below(101));
    const double ky = 1.0 + rng.uniform() * 2.0;
    const double kx = 1.0 + rng.uniform() * 2.0;
    const double phy = rng.uniform(0.0, 2.0 * M_PI);
    const double phx = rng.uniform(0.0, 2.0 * M_PI);

    ImageU8 img = make_image(3, s, s);
    ImageU8 mask = make_image(1, s, s);
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        const double wave =
            9.0 * std::sin(2.0 * M_PI * ky * y / s + phy) +
            9.0 * std::sin(2.0 * M_PI * kx * x / s + phx);
        for (int c = 0; c < 3; ++c) {
          const double grain = rng.uniform(-8.0, 8.0);
          const double v = bg[c] + wave + grain;
          img.at(y, x, c) = static_cast<std::uint8_t>(
              std::min(255.0, std::max(0.0, std::round(v))));
        }
      }

    // Salient object: a primary ellipse with a second, differently
    // textured region attached to it. Retry until the union covers a
    // reasonable share of the frame.
    const double margin = 4.0;
    Ellipse e1{}, e2{};
    std::size_t area = 0;
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double ry = s * rng.uniform(0.12, 0.26);
      const double rx = s * rng.uniform(0.12, 0.26);
      const double cy = rng.uniform(margin + ry, s - 1 - margin - ry);
      const double cx = rng.uniform(margin + rx, s - 1 - margin - rx);
      e1 = {cy, cx, ry, rx};
      const double ry2 = ry * rng.uniform(0.5, 0.9);
      const double rx2 = rx * rng.uniform(0.5, 0.9);
      double cy2 = cy + rng.uniform(-0.8, 0.8) * ry;
      double cx2 = cx + rng.uniform(-0.8, 0.8) * rx;
      cy2 = std::min(s - 1 - margin - ry2, std::max(margin + ry2, cy2));
      cx2 = std::min(s - 1 - margin - rx2, std::max(margin + rx2, cx2));
      e2 = {cy2, cx2, ry2, rx2};
      area = 0;
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
          area += e1.contains(y, x) || e2.contains(y, x);
      const double frac = static_cast<double>(area) / (s * s);
      if (frac >= 0.05 && frac <= 0.5) break;
    }

    std::array<int, 3> fill1{}, fill2a{}, fill2b{};
    do {
      fill1 = random_bright(rng);
    } while (contrast(fill1, bg) < 150);
    do {
      fill2a = random_bright(rng);
    } while (contrast(fill2a, bg) < 150 || contrast(fill2a, fill1) < 80);
    fill2b = {fill2a[0] / 2, fill2a[1] / 2, fill2a[2] / 2};
    const int period = 3 + static_cast<int>(rng.below(4));

    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        const bool in1 = e1.contains(y, x);
        const bool in2 = e2.contains(y, x);
        if (!in1 && !in2) continue;
        mask.at(y, x) = 255;
        const std::array<int, 3>& fill =
            in2 ? (((y / period) + (x / period)) % 2 ? fill2b : fill2a)
                : fill1;
        for (int c = 0; c < 3; ++c) {
          const double v = fill[c] + rng.uniform(-10.0, 10.0);
          img.at(y, x, c) = static_cast<std::uint8_t>(
              std::min(255.0, std::max(0.0, std::round(v))));
        }
      }

    // Distractors: small, very bright, but part of the background.
    const int n_distract = static_cast<int>(rng.below(3));
    for (int d = 0; d < n_distract; ++d) {
      const int r = 2 + static_cast<int>(rng.below(
                            static_cast<std::uint64_t>(std::max(1, s / 20))));
      for (int attempt = 0; attempt < 32; ++attempt) {
        const int cy = r + 1 + static_cast<int>(rng.below(s - 2 * r - 2));
        const int cx = r + 1 + static_cast<int>(rng.below(s - 2 * r - 2));
        bool clear = true;
        for (int y = cy - r; y <= cy + r && clear; ++y)
          for (int x = cx - r; x <= cx + r && clear; ++x)
            if (mask.at(y, x)) clear = false;
        if (!clear) continue;
        const std::array<int, 3> col = random_bright(rng);
        const bool square = rng.coin();
        for (int y = cy - r; y <= cy + r; ++y)
          for (int x = cx - r; x <= cx + r; ++x) {
            if (!square &&
                (y - cy) * (y - cy) + (x - cx) * (x - cx) > r * r)
              continue;
            for (int c = 0; c < 3; ++c)
              img.at(y, x, c) = static_cast<std::uint8_t>(col[c]);
          }
        break;
      }
    }

    char stem[16];
    std::snprintf(stem, sizeof stem, "%04d", idx);
    write_pnm(img, (fs::path(root) / "images" / (std::string(stem) + ".ppm"))
                       .string());
    write_pnm(mask, (fs::path(root) / "masks" / (std::string(stem) + ".pgm"))
                        .string());
  }
}

}  // namespace cagnet
