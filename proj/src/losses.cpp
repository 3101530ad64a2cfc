#include "resplat/losses.hpp"

#include <cmath>

namespace resplat {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_taps(int window, double sigma) {
  std::vector<double> w(window);
  int half = window / 2;
  for (int i = 0; i < window; ++i)
    w[i] = std::exp(-0.5 * (i - half) * (i - half) / (sigma * sigma));
  return w;
}

}  // namespace

double ssim(const ImageRGB& a, const ImageRGB& b, const SsimOptions& opts, ImageRGB* d_a) {
  if (!a.same_dims(b)) throw std::runtime_error("ssim: dimension mismatch");
  if (opts.window % 2 == 0 || opts.window < 3)
    throw std::runtime_error("ssim: window must be odd and >= 3");
  const int W = a.width, H = a.height, half = opts.window / 2;
  std::vector<double> taps = gaussian_taps(opts.window, opts.sigma);

  // Per pixel per channel: window stats, SSIM value, and the three gradient
  // fields that get scattered back through the window.
  struct Stats {
    double mu_a, mu_b, g_mu, g_sa, g_sab;
  };
  std::vector<Stats> st(static_cast<size_t>(W) * H * 3);
  double total = 0;
  if (d_a) *d_a = ImageRGB(W, H, Vec3::Zero());

  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      int y0 = std::max(0, y - half), y1 = std::min(H - 1, y + half);
      int x0 = std::max(0, x - half), x1 = std::min(W - 1, x + half);
      double z = 0;
      for (int yy = y0; yy <= y1; ++yy)
        for (int xx = x0; xx <= x1; ++xx)
          z += taps[yy - y + half] * taps[xx - x + half];
      for (int c = 0; c < 3; ++c) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int yy = y0; yy <= y1; ++yy)
          for (int xx = x0; xx <= x1; ++xx) {
            double w = taps[yy - y + half] * taps[xx - x + half] / z;
            double va = a.at(xx, yy)[c], vb = b.at(xx, yy)[c];
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
        double a1 = 2 * ma * mb + kC1, a2 = 2 * cov + kC2;
        double b1 = ma * ma + mb * mb + kC1, b2 = var_a + var_b + kC2;
        double s = (a1 * a2) / (b1 * b2);
        total += s;
        if (d_a) {
          double ds_da1 = a2 / (b1 * b2), ds_da2 = a1 / (b1 * b2);
          double ds_db1 = -s / b1, ds_db2 = -s / b2;
          Stats& e = st[(static_cast<size_t>(y) * W + x) * 3 + c];
          e.mu_a = ma;
          e.mu_b = mb;
          e.g_mu = 2 * mb * ds_da1 + 2 * ma * ds_db1;
          e.g_sa = ds_db2;        // against d(var_a)
          e.g_sab = 2 * ds_da2;   // against d(cov)
        }
      }
    }
  }
  double n = static_cast<double>(W) * H * 3;
  if (d_a) {
    // Scatter: d mean-SSIM / d a(q) collects every window containing q.
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        int y0 = std::max(0, y - half), y1 = std::min(H - 1, y + half);
        int x0 = std::max(0, x - half), x1 = std::min(W - 1, x + half);
        double z = 0;
        for (int yy = y0; yy <= y1; ++yy)
          for (int xx = x0; xx <= x1; ++xx)
            z += taps[yy - y + half] * taps[xx - x + half];
        for (int yy = y0; yy <= y1; ++yy) {
          for (int xx = x0; xx <= x1; ++xx) {
            double w = taps[yy - y + half] * taps[xx - x + half] / z;
            for (int c = 0; c < 3; ++c) {
              const Stats& e = st[(static_cast<size_t>(y) * W + x) * 3 + c];
              double va = a.at(xx, yy)[c], vb = b.at(xx, yy)[c];
              d_a->at(xx, yy)[c] +=
                  w *
                  (e.g_mu + e.g_sa * 2 * (va - e.mu_a) + e.g_sab * (vb - e.mu_b)) / n;
            }
          }
        }
      }
    }
  }
  return total / n;
}

double loss_rgb(const ImageRGB& rendered, const ImageRGB& gt, const SsimOptions& opts,
                ImageRGB* d_rendered) {
  if (!rendered.same_dims(gt)) throw std::runtime_error("loss_rgb: dimension mismatch");
  double s = ssim(rendered, gt, opts, d_rendered);
  if (d_rendered)
    for (Vec3& g : d_rendered->data) g = -g;  // 1 - SSIM
  double n = static_cast<double>(rendered.size()) * 3;
  double l1 = 0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    Vec3 d = rendered.data[i] - gt.data[i];
    l1 += d.cwiseAbs().sum();
    if (d_rendered)
      d_rendered->data[i] += d.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }) / n;
  }
  return l1 / n + (1.0 - s);
}

double loss_opacity(const ImageF& acc_opacity, const ImageU8& mask, ImageF* d_acc) {
  if (acc_opacity.width != mask.width || acc_opacity.height != mask.height)
    throw std::runtime_error("loss_opacity: dimension mismatch");
  if (d_acc) *d_acc = ImageF(acc_opacity.width, acc_opacity.height, 0.0);
  double total = 0;
  for (size_t i = 0; i < acc_opacity.size(); ++i) {
    double outside = mask.data[i] ? 0.0 : 1.0;
    total += outside * acc_opacity.data[i];
    if (d_acc) d_acc->data[i] = outside;
  }
  return total;
}

double loss_normal(const Image<Vec3>& normal, const Image<Vec3>& normal_hat,
                   const ImageU8& mask, Image<Vec3>* d_normal) {
  if (normal_hat.width == 0) return 0.0;  // absent estimate: regularizer skipped
  if (!normal.same_dims(normal_hat) || normal.width != mask.width ||
      normal.height != mask.height)
    throw std::runtime_error("loss_normal: dimension mismatch");
  if (d_normal) *d_normal = Image<Vec3>(normal.width, normal.height, Vec3::Zero());
  double total = 0;
  for (size_t i = 0; i < normal.size(); ++i) {
    if (!mask.data[i]) continue;
    total += 1.0 - normal.data[i].dot(normal_hat.data[i]);
    if (d_normal) d_normal->data[i] = -normal_hat.data[i];
  }
  return total;
}

}  // namespace resplat
