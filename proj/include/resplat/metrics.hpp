#pragma once

#include <optional>

#include "resplat/image.hpp"

namespace resplat {

struct Detection {
  int64_t id = 0;
  double x = 0, y = 0, w = 0, h = 0;  // axis-aligned pixel box
  ImageU8 mask;                       // optional instance mask
  bool has_mask() const { return mask.width > 0; }
};

struct DetectionSet {
  std::vector<std::vector<Detection>> frames;
};

double box_iou(const Detection& a, const Detection& b);

// |a and b| / |a or b|; 0 when exactly one side is empty, NaN (caller skips)
// when both are.
double mask_iou(const ImageU8& a, const ImageU8& b);

// Minimum-cost assignment on a square cost matrix; returns column for each
// row. O(n^3).
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

struct MatchCounts {
  int64_t misses = 0, false_positives = 0, id_switches = 0, total_gt = 0;
};

struct MatchResult {
  MatchCounts counts;
  std::vector<std::vector<std::pair<int, int>>> frame_pairs;  // (gt idx, pred idx)
  std::vector<double> matched_ious;
  std::vector<double> matched_center_dists;
};

// CLEAR-MOT frame matching: carry over still-valid previous matches, then
// Hungarian on the rest maximizing IoU at the threshold.
MatchResult match_frames(const DetectionSet& gt, const DetectionSet& pred,
                         double iou_thresh = 0.5);

double mota(const MatchCounts& counts);

enum class MotpMode { kOneMinusIou, kCenterDistance };
double motp(const MatchResult& result, MotpMode mode = MotpMode::kOneMinusIou);

double idf1(const DetectionSet& gt, const DetectionSet& pred, double iou_thresh = 0.5);

// Mean mask IoU over matched pairs (mask-bearing detections only).
double mean_mask_iou(const DetectionSet& gt, const DetectionSet& pred,
                     const MatchResult& result);

// Linear sRGB (D65 primaries) -> CIELAB.
Vec3 rgb_to_cielab(const Vec3& linear_rgb);
std::vector<Vec3> image_to_cielab(const ImageRGB& img);

// Average 1-D W1 over random projection directions; sets of mismatched size
// are resampled by sorted-quantile interpolation.
double sliced_wasserstein(const std::vector<Eigen::VectorXd>& a,
                          const std::vector<Eigen::VectorXd>& b, int n_proj,
                          uint64_t seed);

struct CielabSlicedW1 {
  double w1 = 0;     // full 3-D
  double w1_l = 0;   // L* marginal
  double w1_ab = 0;  // (a*, b*) marginal
};
CielabSlicedW1 cielab_sliced_w1(const std::vector<Vec3>& a, const std::vector<Vec3>& b,
                                int n_proj, uint64_t seed);

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // unbiased, symmetric PSD
  int64_t n = 0;
};

FeatureStats compute_stats(const Eigen::MatrixXd& features);  // one row per sample

// Frechet distance via symmetric eigendecomposition of Sa^1/2 Sb Sa^1/2.
double fid(const FeatureStats& a, const FeatureStats& b);

// Unbiased polynomial-kernel MMD^2, kernel (x.y/D + 1)^3.
double kid(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b);

}  // namespace resplat
