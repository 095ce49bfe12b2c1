#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cagnet/tensor.hpp"

namespace cagnet {

// Every metric takes a prediction S with values in [0,1] and a ground
// truth G that is exactly binary; shapes must match. The structured
// measures (avg_f, weighted_f, e_measure) act on single-channel single
// images; mae and the PR machinery reduce over whatever they are given.

double mae(const Tensor& s, const Tensor& g);

struct PrPoint {
  double precision = 0.0;
  double recall = 0.0;
};

// Pixels with S >= t count as predicted foreground. An empty prediction
// has precision 0 by convention; an empty ground truth has recall 0.
PrPoint pr_at_threshold(const Tensor& s, const Tensor& g, double t);

// beta^2 = 0.3 favours precision; degenerate P = R = 0 maps to F = 0.
double f_measure(double precision, double recall, double beta2 = 0.3);

struct PrCurve {
  std::array<double, 256> precision{};
  std::array<double, 256> recall{};
  std::array<double, 256> f{};
};

// 256 operating points at thresholds i/255, i = 0..255.
PrCurve pr_curve(const Tensor& s, const Tensor& g);

// F at the adaptive threshold T = min(1, 2*mean(S)). An all-zero map has
// T = 0 and scores 0 (empty prediction).
double avg_f(const Tensor& s, const Tensor& g);

// Weighted F-beta: errors are propagated from foreground to background
// through the distance transform, smoothed with a 7x7 Gaussian (sigma 5),
// and background errors decay with distance from the object. beta^2 = 1.
// An empty ground truth scores 0.
double weighted_f(const Tensor& s, const Tensor& g);

// Enhanced-alignment measure of the adaptively binarised prediction.
// Degenerate ground truths fall back to the plain agreement rate.
double e_measure(const Tensor& s, const Tensor& g);

// Exact Euclidean distance transform. For every pixel: squared distance
// to the nearest set pixel and that pixel's flattened index. An empty
// mask yields infinite distances and index -1.
struct DistanceTransform {
  std::vector<double> dist2;
  std::vector<int> nearest;
};
DistanceTransform distance_transform(const std::vector<std::uint8_t>& fg,
                                     int h, int w);

struct EvalReport {
  std::size_t images = 0;
  double mae = 0.0;
  double avg_f = 0.0;
  double weighted_f = 0.0;
  double e_measure = 0.0;
  double max_f = 0.0;  // peak of the averaged curve
  std::array<double, 256> precision{};
  std::array<double, 256> recall{};
  std::array<double, 256> f{};
};

// Pairs up *.pgm files by stem: every mask in gt_dir must have a
// prediction in pred_dir. Predictions are rescaled to mask size first.
// Files are processed in sorted order, so directory enumeration order
// never changes the report.
EvalReport evaluate_dataset(const std::string& pred_dir,
                            const std::string& gt_dir);

void write_report(const EvalReport& r, const std::string& report_path,
                  const std::string& curve_path);

}  // namespace cagnet
