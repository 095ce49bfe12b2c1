#include "cagnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "cagnet/image.hpp"
#include "cagnet/ops.hpp"

namespace cagnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_pair(const Tensor& s, const Tensor& g) {
  check(s.same_shape(g), "metric: prediction " + s.shape().str() +
                             " vs ground truth " + g.shape().str());
  for (std::size_t i = 0; i < s.size(); ++i)
    check(s[i] >= 0.0 && s[i] <= 1.0,
          "metric: prediction values must lie in [0,1]");
  for (std::size_t i = 0; i < g.size(); ++i)
    check(g[i] == 0.0 || g[i] == 1.0,
          "metric: ground truth must be exactly binary");
}

void require_single_map(const Tensor& t, const char* what) {
  check(t.shape().n == 1 && t.shape().c == 1,
        std::string(what) + " works on a single-channel single image, got " +
            t.shape().str());
}

const std::array<double, 256>& thresholds() {
  static const std::array<double, 256> t = [] {
    std::array<double, 256> v{};
    for (int i = 0; i < 256; ++i) v[i] = static_cast<double>(i) / 255.0;
    return v;
  }();
  return t;
}

// 7x7 Gaussian, sigma 5, normalised to unit sum.
const std::array<double, 49>& gauss7() {
  static const std::array<double, 49> k = [] {
    std::array<double, 49> v{};
    double total = 0.0;
    for (int dy = -3; dy <= 3; ++dy)
      for (int dx = -3; dx <= 3; ++dx) {
        const double e = std::exp(-(dy * dy + dx * dx) / (2.0 * 25.0));
        v[(dy + 3) * 7 + (dx + 3)] = e;
        total += e;
      }
    for (auto& x : v) x /= total;
    return v;
  }();
  return k;
}

}  // namespace

double mae(const Tensor& s, const Tensor& g) {
  validate_pair(s, g);
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) acc += std::abs(s[i] - g[i]);
  return acc / static_cast<double>(s.size());
}

PrPoint pr_at_threshold(const Tensor& s, const Tensor& g, double t) {
  validate_pair(s, g);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool pred = s[i] >= t;
    const bool truth = g[i] == 1.0;
    tp += pred && truth;
    fp += pred && !truth;
    fn += !pred && truth;
  }
  PrPoint out;
  if (tp + fp > 0) out.precision = static_cast<double>(tp) / (tp + fp);
  if (tp + fn > 0) out.recall = static_cast<double>(tp) / (tp + fn);
  return out;
}

double f_measure(double precision, double recall, double beta2) {
  const double den = beta2 * precision + recall;
  if (den == 0.0) return 0.0;
  return (1.0 + beta2) * precision * recall / den;
}

PrCurve pr_curve(const Tensor& s, const Tensor& g) {
  validate_pair(s, g);
  const auto& t = thresholds();
  std::array<std::size_t, 256> pred_hist{}, tp_hist{};
  std::size_t total_g = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    // Largest threshold index still covered by this pixel; t[0] = 0 always
    // qualifies, so k >= 0.
    const int k =
        static_cast<int>(std::upper_bound(t.begin(), t.end(), s[i]) -
                         t.begin()) -
        1;
    pred_hist[k]++;
    if (g[i] == 1.0) {
      tp_hist[k]++;
      total_g++;
    }
  }
  PrCurve out;
  std::size_t pred_ge = 0, tp_ge = 0;
  for (int i = 255; i >= 0; --i) {
    pred_ge += pred_hist[i];
    tp_ge += tp_hist[i];
    out.precision[i] =
        pred_ge > 0 ? static_cast<double>(tp_ge) / pred_ge : 0.0;
    out.recall[i] = total_g > 0 ? static_cast<double>(tp_ge) / total_g : 0.0;
    out.f[i] = f_measure(out.precision[i], out.recall[i]);
  }
  return out;
}

double avg_f(const Tensor& s, const Tensor& g) {
  validate_pair(s, g);
  double mean_s = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) mean_s += s[i];
  mean_s /= static_cast<double>(s.size());
  const double t = std::min(1.0, 2.0 * mean_s);
  if (t == 0.0) return 0.0;  // an all-zero map predicts nothing useful
  const PrPoint pr = pr_at_threshold(s, g, t);
  return f_measure(pr.precision, pr.recall);
}

DistanceTransform distance_transform(const std::vector<std::uint8_t>& fg,
                                     int h, int w) {
  check(h >= 1 && w >= 1 &&
            fg.size() == static_cast<std::size_t>(h) * w,
        "distance_transform: mask size does not match extents");
  DistanceTransform out;
  out.dist2.assign(fg.size(), kInf);
  out.nearest.assign(fg.size(), -1);

  // Pass 1: nearest set row within each column (ties keep the upper row).
  std::vector<int> col_src(fg.size(), -1);
  std::vector<double> col_d2(fg.size(), kInf);
  for (int x = 0; x < w; ++x) {
    int prev = -1;
    for (int y = 0; y < h; ++y) {
      if (fg[static_cast<std::size_t>(y) * w + x]) prev = y;
      if (prev >= 0) {
        col_src[static_cast<std::size_t>(y) * w + x] = prev;
        col_d2[static_cast<std::size_t>(y) * w + x] =
            static_cast<double>(y - prev) * (y - prev);
      }
    }
    int next = -1;
    for (int y = h - 1; y >= 0; --y) {
      if (fg[static_cast<std::size_t>(y) * w + x]) next = y;
      if (next >= 0) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double d2 = static_cast<double>(next - y) * (next - y);
        if (d2 < col_d2[i]) {
          col_d2[i] = d2;
          col_src[i] = next;
        }
      }
    }
  }

  // Pass 2: lower envelope of parabolas along each row, tracking which
  // column each envelope segment came from.
  std::vector<int> v(w);
  std::vector<double> z(w + 1);
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    int k = -1;
    for (int q = 0; q < w; ++q) {
      const double fq = col_d2[row + q];
      if (fq == kInf) continue;
      double s = 0.0;
      while (k >= 0) {
        const int p = v[k];
        s = ((fq + static_cast<double>(q) * q) -
             (col_d2[row + p] + static_cast<double>(p) * p)) /
            (2.0 * (q - p));
        if (s <= z[k])
          --k;
        else
          break;
      }
      if (k < 0) {
        k = 0;
        v[0] = q;
        z[0] = -kInf;
      } else {
        ++k;
        v[k] = q;
        z[k] = s;
      }
      z[k + 1] = kInf;
    }
    if (k < 0) continue;  // empty mask: row keeps inf / -1
    int seg = 0;
    for (int x = 0; x < w; ++x) {
      while (z[seg + 1] < x) ++seg;
      const int q = v[seg];
      out.dist2[row + x] =
          static_cast<double>(x - q) * (x - q) + col_d2[row + q];
      out.nearest[row + x] = col_src[row + q] * w + q;
    }
  }
  return out;
}

double weighted_f(const Tensor& s, const Tensor& g) {
  validate_pair(s, g);
  require_single_map(s, "weighted_f");
  const int h = s.shape().h, w = s.shape().w;
  const std::size_t n = s.size();

  std::vector<std::uint8_t> fg(n);
  std::size_t nfg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fg[i] = g[i] == 1.0;
    nfg += fg[i];
  }
  if (nfg == 0) return 0.0;

  std::vector<double> err(n);
  for (std::size_t i = 0; i < n; ++i) err[i] = std::abs(s[i] - g[i]);

  // Background pixels inherit the error of their nearest object pixel, so
  // that mistakes near the object count differently from distant ones.
  const DistanceTransform dt = distance_transform(fg, h, w);
  std::vector<double> et(err);
  for (std::size_t i = 0; i < n; ++i)
    if (!fg[i]) et[i] = err[dt.nearest[i]];

  const auto& kernel = gauss7();
  std::vector<double> ea(n, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -3; dy <= 3; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -3; dx <= 3; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          acc += kernel[(dy + 3) * 7 + (dx + 3)] *
                 et[static_cast<std::size_t>(yy) * w + xx];
        }
      }
      ea[static_cast<std::size_t>(y) * w + x] = acc;
    }

  const double decay = std::log(0.5) / 5.0;
  double fnw = 0.0, fpw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (fg[i]) {
      // On the object, dependency between neighbouring pixels lets the
      // smoothed error stand in when it is smaller.
      fnw += std::min(err[i], ea[i]);
    } else {
      const double b = 2.0 - std::exp(decay * std::sqrt(dt.dist2[i]));
      fpw += err[i] * b;
    }
  }
  const double tpw = static_cast<double>(nfg) - fnw;
  const double recall = 1.0 - fnw / static_cast<double>(nfg);
  const double precision = (tpw + fpw) > 0.0 ? tpw / (tpw + fpw) : 0.0;
  return f_measure(precision, recall, 1.0);
}

double e_measure(const Tensor& s, const Tensor& g) {
  validate_pair(s, g);
  require_single_map(s, "e_measure");
  const std::size_t n = s.size();

  double mean_s = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_s += s[i];
  mean_s /= static_cast<double>(n);
  const double t = std::min(1.0, 2.0 * mean_s);

  std::vector<double> bin(n);
  double mu_b = 0.0, mu_g = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    bin[i] = s[i] >= t ? 1.0 : 0.0;
    mu_b += bin[i];
    mu_g += g[i];
  }
  mu_b /= static_cast<double>(n);
  mu_g /= static_cast<double>(n);

  // Degenerate ground truths reduce to the plain agreement rate.
  if (mu_g == 0.0) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += 1.0 - bin[i];
    return acc / static_cast<double>(n);
  }
  if (mu_g == 1.0) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += bin[i];
    return acc / static_cast<double>(n);
  }

  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ps = bin[i] - mu_b;
    const double pg = g[i] - mu_g;
    const double den = ps * ps + pg * pg;
    const double align = den > 0.0 ? 2.0 * ps * pg / den : 0.0;
    acc += (1.0 + align) * (1.0 + align) / 4.0;
  }
  return acc / static_cast<double>(n);
}

EvalReport evaluate_dataset(const std::string& pred_dir,
                            const std::string& gt_dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> stems;
  check(fs::is_directory(gt_dir), "not a directory: " + gt_dir);
  for (const auto& entry : fs::directory_iterator(gt_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      stems.push_back(entry.path().stem().string());
  std::sort(stems.begin(), stems.end());
  check(!stems.empty(), "no .pgm ground-truth masks in " + gt_dir);

  EvalReport r;
  for (const auto& stem : stems) {
    const fs::path gt_path = fs::path(gt_dir) / (stem + ".pgm");
    const fs::path pred_path = fs::path(pred_dir) / (stem + ".pgm");
    check(fs::exists(pred_path),
          "missing prediction for mask: " + pred_path.string());

    const Tensor gt = mask_to_tensor(read_pnm(gt_path.string()));
    Tensor pred = image_to_tensor(read_pnm(pred_path.string()));
    check(pred.shape().c == 1,
          "prediction must be greyscale: " + pred_path.string());
    if (pred.shape().h != gt.shape().h || pred.shape().w != gt.shape().w)
      pred = resize_bilinear(pred, gt.shape().h, gt.shape().w);

    r.mae += mae(pred, gt);
    r.avg_f += avg_f(pred, gt);
    r.weighted_f += weighted_f(pred, gt);
    r.e_measure += e_measure(pred, gt);
    const PrCurve c = pr_curve(pred, gt);
    for (int i = 0; i < 256; ++i) {
      r.precision[i] += c.precision[i];
      r.recall[i] += c.recall[i];
    }
    r.images++;
  }

  const double inv = 1.0 / static_cast<double>(r.images);
  r.mae *= inv;
  r.avg_f *= inv;
  r.weighted_f *= inv;
  r.e_measure *= inv;
  for (int i = 0; i < 256; ++i) {
    r.precision[i] *= inv;
    r.recall[i] *= inv;
    r.f[i] = f_measure(r.precision[i], r.recall[i]);
    r.max_f = std::max(r.max_f, r.f[i]);
  }
  return r;
}

void write_report(const EvalReport& r, const std::string& report_path,
                  const std::string& curve_path) {
  {
    std::ofstream out(report_path);
    check(out.good(), "cannot write " + report_path);
    out.precision(12);
    out << "images " << r.images << "\n"
        << "mae " << r.mae << "\n"
        << "avg_f " << r.avg_f << "\n"
        << "weighted_f " << r.weighted_f << "\n"
        << "e_measure " << r.e_measure << "\n"
        << "max_f " << r.max_f << "\n";
  }
  std::ofstream out(curve_path);
  check(out.good(), "cannot write " + curve_path);
  out.precision(12);
  out << "threshold,precision,recall,f\n";
  for (int i = 0; i < 256; ++i)
    out << (static_cast<double>(i) / 255.0) << "," << r.precision[i] << ","
        << r.recall[i] << "," << r.f[i] << "\n";
}

}  // namespace cagnet
