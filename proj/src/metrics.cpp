#include "resplat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace resplat {

double box_iou(const Detection& a, const Detection& b) {
  double x0 = std::max(a.x, b.x), y0 = std::max(a.y, b.y);
  double x1 = std::min(a.x + a.w, b.x + b.w), y1 = std::min(a.y + a.h, b.y + b.h);
  double inter = std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
  double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double mask_iou(const ImageU8& a, const ImageU8& b) {
  if (!a.same_dims(b)) throw std::runtime_error("mask_iou: dimension mismatch");
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    bool pa = a.data[i] != 0, pb = b.data[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  if (uni == 0) return std::numeric_limits<double>::quiet_NaN();  // both empty
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Classic potentials-based Hungarian algorithm.
std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::runtime_error("hungarian: matrix must be square");
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(n + 1, 0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      int i0 = p[j0], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assign(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) assign[p[j] - 1] = j - 1;
  return assign;
}

namespace {

double pair_iou(const Detection& g, const Detection& p) {
  if (g.has_mask() && p.has_mask()) return mask_iou(g.mask, p.mask);
  return box_iou(g, p);
}

constexpr double kBigCost = 1e6;

// Optimal valid-pair matching maximizing total IoU; returns (gt idx, pred idx).
std::vector<std::pair<int, int>> assign_pairs(const std::vector<const Detection*>& gt,
                                              const std::vector<const Detection*>& pred,
                                              double iou_thresh,
                                              std::vector<double>* ious_out) {
  std::vector<std::pair<int, int>> pairs;
  if (gt.empty() || pred.empty()) return pairs;
  int n = static_cast<int>(std::max(gt.size(), pred.size()));
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, n, kBigCost);
  for (size_t i = 0; i < gt.size(); ++i)
    for (size_t j = 0; j < pred.size(); ++j) {
      double iou = pair_iou(*gt[i], *pred[j]);
      if (std::isnan(iou)) continue;
      if (iou >= iou_thresh) cost(static_cast<int>(i), static_cast<int>(j)) = 1.0 - iou;
    }
  std::vector<int> assign = hungarian(cost);
  for (size_t i = 0; i < gt.size(); ++i) {
    int j = assign[static_cast<int>(i)];
    if (j < 0 || j >= static_cast<int>(pred.size())) continue;
    if (cost(static_cast<int>(i), j) >= kBigCost) continue;
    pairs.push_back({static_cast<int>(i), j});
    if (ious_out) ious_out->push_back(1.0 - cost(static_cast<int>(i), j));
  }
  return pairs;
}

}  // namespace

MatchResult match_frames(const DetectionSet& gt, const DetectionSet& pred,
                         double iou_thresh) {
  if (iou_thresh <= 0 || iou_thresh >= 1)
    throw std::runtime_error("match_frames: iou_thresh must be in (0,1)");
  size_t n_frames = std::max(gt.frames.size(), pred.frames.size());
  MatchResult res;
  res.frame_pairs.resize(n_frames);
  std::map<int64_t, int64_t> last_match;  // gt id -> last matched pred id

  for (size_t f = 0; f < n_frames; ++f) {
    static const std::vector<Detection> kEmpty;
    const std::vector<Detection>& gts = f < gt.frames.size() ? gt.frames[f] : kEmpty;
    const std::vector<Detection>& preds = f < pred.frames.size() ? pred.frames[f] : kEmpty;
    res.counts.total_gt += static_cast<int64_t>(gts.size());

    std::vector<bool> gt_done(gts.size(), false), pred_done(preds.size(), false);
    std::vector<std::pair<int, int>>& out = res.frame_pairs[f];

    // Carry over previous-frame matches that are still valid.
    for (size_t i = 0; i < gts.size(); ++i) {
      auto it = last_match.find(gts[i].id);
      if (it == last_match.end()) continue;
      for (size_t j = 0; j < preds.size(); ++j) {
        if (pred_done[j] || preds[j].id != it->second) continue;
        double iou = pair_iou(gts[i], preds[j]);
        if (!std::isnan(iou) && iou >= iou_thresh) {
          gt_done[i] = true;
          pred_done[j] = true;
          out.push_back({static_cast<int>(i), static_cast<int>(j)});
          res.matched_ious.push_back(iou);
          res.matched_center_dists.push_back(
              std::hypot(gts[i].x + gts[i].w / 2 - preds[j].x - preds[j].w / 2,
                         gts[i].y + gts[i].h / 2 - preds[j].y - preds[j].h / 2));
        }
        break;
      }
    }
    // Optimal matching on the remainder.
    std::vector<const Detection*> rem_gt, rem_pred;
    std::vector<int> rem_gt_idx, rem_pred_idx;
    for (size_t i = 0; i < gts.size(); ++i)
      if (!gt_done[i]) {
        rem_gt.push_back(&gts[i]);
        rem_gt_idx.push_back(static_cast<int>(i));
      }
    for (size_t j = 0; j < preds.size(); ++j)
      if (!pred_done[j]) {
        rem_pred.push_back(&preds[j]);
        rem_pred_idx.push_back(static_cast<int>(j));
      }
    std::vector<double> ious;
    for (auto [ri, rj] : assign_pairs(rem_gt, rem_pred, iou_thresh, &ious)) {
      int i = rem_gt_idx[ri], j = rem_pred_idx[rj];
      gt_done[i] = true;
      pred_done[j] = true;
      out.push_back({i, j});
      res.matched_center_dists.push_back(
          std::hypot(gts[i].x + gts[i].w / 2 - preds[j].x - preds[j].w / 2,
                     gts[i].y + gts[i].h / 2 - preds[j].y - preds[j].h / 2));
    }
    res.matched_ious.insert(res.matched_ious.end(), ious.begin(), ious.end());

    // Counts and identity switches.
    for (size_t i = 0; i < gts.size(); ++i)
      if (!gt_done[i]) ++res.counts.misses;
    for (size_t j = 0; j < preds.size(); ++j)
      if (!pred_done[j]) ++res.counts.false_positives;
    for (auto [i, j] : out) {
      auto it = last_match.find(gts[i].id);
      if (it != last_match.end() && it->second != preds[j].id) ++res.counts.id_switches;
      last_match[gts[i].id] = preds[j].id;
    }
  }
  return res;
}

double mota(const MatchCounts& c) {
  if (c.total_gt == 0) throw std::runtime_error("mota: no ground-truth objects");
  return 1.0 - static_cast<double>(c.misses + c.false_positives + c.id_switches) /
                   static_cast<double>(c.total_gt);
}

double motp(const MatchResult& result, MotpMode mode) {
  const std::vector<double>& vals = mode == MotpMode::kOneMinusIou
                                        ? result.matched_ious
                                        : result.matched_center_dists;
  if (vals.empty()) return 0.0;
  double sum = 0;
  for (double v : vals) sum += mode == MotpMode::kOneMinusIou ? 1.0 - v : v;
  return sum / static_cast<double>(vals.size());
}

double idf1(const DetectionSet& gt, const DetectionSet& pred, double iou_thresh) {
  // Trajectory-level overlap counts.
  std::map<int64_t, int> gt_ids, pred_ids;
  int64_t total_gt = 0, total_pred = 0;
  for (const auto& f : gt.frames)
    for (const Detection& d : f) {
      gt_ids.emplace(d.id, static_cast<int>(gt_ids.size()));
      ++total_gt;
    }
  for (const auto& f : pred.frames)
    for (const Detection& d : f) {
      pred_ids.emplace(d.id, static_cast<int>(pred_ids.size()));
      ++total_pred;
    }
  if (total_gt + total_pred == 0) return 1.0;
  int ng = static_cast<int>(gt_ids.size()), np = static_cast<int>(pred_ids.size());
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(std::max(ng, np), std::max(ng, np));
  size_t n_frames = std::max(gt.frames.size(), pred.frames.size());
  for (size_t f = 0; f < n_frames; ++f) {
    if (f >= gt.frames.size() || f >= pred.frames.size()) continue;
    for (const Detection& g : gt.frames[f])
      for (const Detection& p : pred.frames[f]) {
        double iou = pair_iou(g, p);
        if (!std::isnan(iou) && iou >= iou_thresh)
          overlap(gt_ids[g.id], pred_ids[p.id]) += 1.0;
      }
  }
  int n = std::max(ng, np);
  std::vector<int> assign = hungarian(-overlap.topLeftCorner(n, n));
  double idtp = 0;
  for (int i = 0; i < ng; ++i) {
    int j = assign[i];
    if (j >= 0 && j < np) idtp += overlap(i, j);
  }
  double idfn = static_cast<double>(total_gt) - idtp;
  double idfp = static_cast<double>(total_pred) - idtp;
  return 2 * idtp / (2 * idtp + idfp + idfn);
}

double mean_mask_iou(const DetectionSet& gt, const DetectionSet& pred,
                     const MatchResult& result) {
  double sum = 0;
  int count = 0;
  for (size_t f = 0; f < result.frame_pairs.size(); ++f) {
    for (auto [i, j] : result.frame_pairs[f]) {
      const Detection& g = gt.frames[f][i];
      const Detection& p = pred.frames[f][j];
      if (!g.has_mask() || !p.has_mask()) continue;
      double iou = mask_iou(g.mask, p.mask);
      if (std::isnan(iou)) continue;  // both empty: skipped
      sum += iou;
      ++count;
    }
  }
  return count ? sum / count : 0.0;
}

Vec3 rgb_to_cielab(const Vec3& linear_rgb) {
  Vec3 c = linear_rgb.cwiseMax(0.0).cwiseMin(1.0);
  // sRGB D65 primaries.
  double xr = (0.4124564 * c.x() + 0.3575761 * c.y() + 0.1804375 * c.z()) / 0.9504559;
  double yr = 0.2126729 * c.x() + 0.7151522 * c.y() + 0.0721750 * c.z();
  double zr = (0.0193339 * c.x() + 0.1191920 * c.y() + 0.9503041 * c.z()) / 1.0890578;
  auto f = [](double t) {
    constexpr double d = 6.0 / 29.0;
    return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
  };
  double fx = f(xr), fy = f(yr), fz = f(zr);
  return Vec3(116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz));
}

std::vector<Vec3> image_to_cielab(const ImageRGB& img) {
  std::vector<Vec3> out;
  out.reserve(img.size());
  for (const Vec3& p : img.data) out.push_back(rgb_to_cielab(p));
  return out;
}

namespace {

// 1-D W1 between sorted samples, resampled to a common size by
// sorted-quantile interpolation when sizes differ.
double w1_sorted(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  auto quantile = [](const std::vector<double>& v, double q) {
    double pos = q * (static_cast<double>(v.size()) - 1);
    size_t lo = static_cast<size_t>(pos);
    size_t hi = std::min(lo + 1, v.size() - 1);
    double f = pos - lo;
    return v[lo] * (1 - f) + v[hi] * f;
  };
  size_t n = std::max(a.size(), b.size());
  double sum = 0;
  if (a.size() == b.size()) {
    for (size_t i = 0; i < n; ++i) sum += std::abs(a[i] - b[i]);
  } else {
    for (size_t i = 0; i < n; ++i) {
      double q = (i + 0.5) / n;
      sum += std::abs(quantile(a, q) - quantile(b, q));
    }
  }
  return sum / n;
}

}  // namespace

double sliced_wasserstein(const std::vector<Eigen::VectorXd>& a,
                          const std::vector<Eigen::VectorXd>& b, int n_proj,
                          uint64_t seed) {
  if (a.empty() || b.empty()) throw std::runtime_error("sliced_wasserstein: empty set");
  if (n_proj < 1) throw std::runtime_error("sliced_wasserstein: n_proj must be >= 1");
  int dim = static_cast<int>(a[0].size());
  if (dim == 1) {
    std::vector<double> xa, xb;
    for (const auto& v : a) xa.push_back(v[0]);
    for (const auto& v : b) xb.push_back(v[0]);
    return w1_sorted(std::move(xa), std::move(xb));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double total = 0;
  for (int p = 0; p < n_proj; ++p) {
    Eigen::VectorXd dir(dim);
    do {
      for (int d = 0; d < dim; ++d) dir[d] = gauss(rng);
    } while (dir.norm() < 1e-12);
    dir.normalize();
    std::vector<double> xa, xb;
    xa.reserve(a.size());
    xb.reserve(b.size());
    for (const auto& v : a) xa.push_back(dir.dot(v));
    for (const auto& v : b) xb.push_back(dir.dot(v));
    total += w1_sorted(std::move(xa), std::move(xb));
  }
  return total / n_proj;
}

CielabSlicedW1 cielab_sliced_w1(const std::vector<Vec3>& a, const std::vector<Vec3>& b,
                                int n_proj, uint64_t seed) {
  auto to_vx = [](const std::vector<Vec3>& pts, std::initializer_list<int> dims) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(pts.size());
    for (const Vec3& p : pts) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(dims.size()));
      int i = 0;
      for (int d : dims) v[i++] = p[d];
      out.push_back(std::move(v));
    }
    return out;
  };
  CielabSlicedW1 res;
  res.w1 = sliced_wasserstein(to_vx(a, {0, 1, 2}), to_vx(b, {0, 1, 2}), n_proj, seed);
  res.w1_l = sliced_wasserstein(to_vx(a, {0}), to_vx(b, {0}), n_proj, seed + 1);
  res.w1_ab = sliced_wasserstein(to_vx(a, {1, 2}), to_vx(b, {1, 2}), n_proj, seed + 2);
  return res;
}

FeatureStats compute_stats(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) throw std::runtime_error("compute_stats: need n >= 2 samples");
  FeatureStats s;
  s.n = features.rows();
  s.mean = features.colwise().mean();
  Eigen::MatrixXd centered = features.rowwise() - s.mean.transpose();
  s.covariance = centered.transpose() * centered / static_cast<double>(s.n - 1);
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose());
  return s;
}

double fid(const FeatureStats& a, const FeatureStats& b) {
  if (a.mean.size() != b.mean.size()) throw std::runtime_error("fid: dimension mismatch");
  auto check_psd = [](const Eigen::MatrixXd& c) {
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-8)
      throw std::runtime_error("fid: covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    double max_ev = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
    if (eig.eigenvalues().minCoeff() < -1e-8 * max_ev - 1e-10)
      throw std::runtime_error("fid: covariance not PSD");
  };
  check_psd(a.covariance);
  check_psd(b.covariance);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(a.covariance);
  Eigen::VectorXd sqrt_ev = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd a_half =
      ea.eigenvectors() * sqrt_ev.asDiagonal() * ea.eigenvectors().transpose();
  Eigen::MatrixXd m = a_half * b.covariance * a_half;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m);
  double tr_sqrt = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() -
         2.0 * tr_sqrt;
}

double kid(const Eigen::MatrixXd& fa, const Eigen::MatrixXd& fb) {
  if (fa.cols() != fb.cols()) throw std::runtime_error("kid: dimension mismatch");
  int64_t m = fa.rows(), n = fb.rows();
  if (m < 2 || n < 2) throw std::runtime_error("kid: need >= 2 samples per set");
  double d = static_cast<double>(fa.cols());
  auto kernel = [&](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    return ((x * y.transpose() / d).array() + 1.0).cube().matrix();
  };
  Eigen::MatrixXd kaa = kernel(fa, fa), kbb = kernel(fb, fb), kab = kernel(fa, fb);
  double term_a = (kaa.sum() - kaa.trace()) / static_cast<double>(m * (m - 1));
  double term_b = (kbb.sum() - kbb.trace()) / static_cast<double>(n * (n - 1));
  double term_ab = 2.0 * kab.sum() / static_cast<double>(m * n);
  return term_a + term_b - term_ab;
}

}  // namespace resplat
