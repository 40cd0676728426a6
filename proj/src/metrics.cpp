#include "oral3d/metrics.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "oral3d/error.hpp"

namespace oral3d {

namespace {

void require_same_dims(const Volume3& a, const Volume3& b) {
  if (!(a.dims() == b.dims())) throw Error(ErrorCode::Dimension, "volumes differ in shape");
}

double psnr_from_mse(double mse) {
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(4.0 / mse);
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(size);
  const double c = 0.5 * (size - 1);
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    k[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
    total += k[i];
  }
  for (double& v : k) v /= total;
  return k;
}

struct Field {
  int nx, ny, nz;
  std::vector<double> v;
  double& at(int x, int y, int z) { return v[(static_cast<std::size_t>(z) * ny + y) * nx + x]; }
  double at(int x, int y, int z) const { return v[(static_cast<std::size_t>(z) * ny + y) * nx + x]; }
};

// Valid-mode separable filtering along x, then y, then z.
Field filter_valid(const Field& in, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  Field fx{in.nx - n + 1, in.ny, in.nz, {}};
  fx.v.assign(static_cast<std::size_t>(fx.nx) * fx.ny * fx.nz, 0.0);
  for (int z = 0; z < fx.nz; ++z)
    for (int y = 0; y < fx.ny; ++y)
      for (int x = 0; x < fx.nx; ++x) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += k[i] * in.at(x + i, y, z);
        fx.at(x, y, z) = s;
      }
  Field fy{fx.nx, fx.ny - n + 1, fx.nz, {}};
  fy.v.assign(static_cast<std::size_t>(fy.nx) * fy.ny * fy.nz, 0.0);
  for (int z = 0; z < fy.nz; ++z)
    for (int y = 0; y < fy.ny; ++y)
      for (int x = 0; x < fy.nx; ++x) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += k[i] * fx.at(x, y + i, z);
        fy.at(x, y, z) = s;
      }
  Field fz{fy.nx, fy.ny, fy.nz - n + 1, {}};
  fz.v.assign(static_cast<std::size_t>(fz.nx) * fz.ny * fz.nz, 0.0);
  for (int z = 0; z < fz.nz; ++z)
    for (int y = 0; y < fz.ny; ++y)
      for (int x = 0; x < fz.nx; ++x) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += k[i] * fy.at(x, y, z + i);
        fz.at(x, y, z) = s;
      }
  return fz;
}

Field product(const Volume3& a, const Volume3& b) {
  Field f{a.nx(), a.ny(), a.nz(), std::vector<double>(a.values().size())};
  for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i] = static_cast<double>(a.values()[i]) * b.values()[i];
  return f;
}

Field as_field(const Volume3& a) {
  return {a.nx(), a.ny(), a.nz(), std::vector<double>(a.values().begin(), a.values().end())};
}

}  // namespace

void SsimConfig::validate() const {
  if (window < 1 || !(sigma > 0) || !(range > 0) || k1 < 0 || k2 < 0) {
    throw Error(ErrorCode::Validation, "ssim needs window >= 1, sigma > 0, range > 0, k1, k2 >= 0");
  }
}

double psnr(const Volume3& a, const Volume3& b) {
  require_same_dims(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const double d = static_cast<double>(a.values()[i]) - b.values()[i];
    acc += d * d;
  }
  return psnr_from_mse(acc / static_cast<double>(a.values().size()));
}

double psnr(const Volume3& a, const Volume3& b, const Mask3& mask) {
  require_same_dims(a, b);
  if (!(mask.dims() == a.dims())) throw Error(ErrorCode::Dimension, "mask differs from volume shape");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    if (!mask.bits()[i]) continue;
    const double d = static_cast<double>(a.values()[i]) - b.values()[i];
    acc += d * d;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::EmptyBatch, "psnr mask selects no voxels");
  return psnr_from_mse(acc / static_cast<double>(n));
}

double ssim3(const Volume3& a, const Volume3& b, const SsimConfig& cfg) {
  require_same_dims(a, b);
  cfg.validate();
  if (a.nx() < cfg.window || a.ny() < cfg.window || a.nz() < cfg.window) {
    throw Error(ErrorCode::Dimension, "volume is smaller than the " + std::to_string(cfg.window) + "^3 ssim window");
  }
  const auto k = gaussian_kernel(cfg.window, cfg.sigma);
  const Field mu_a = filter_valid(as_field(a), k);
  const Field mu_b = filter_valid(as_field(b), k);
  const Field aa = filter_valid(product(a, a), k);
  const Field bb = filter_valid(product(b, b), k);
  const Field ab = filter_valid(product(a, b), k);
  const double c1 = (cfg.k1 * cfg.range) * (cfg.k1 * cfg.range);
  const double c2 = (cfg.k2 * cfg.range) * (cfg.k2 * cfg.range);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
    const double ma = mu_a.v[i], mb = mu_b.v[i];
    const double va = aa.v[i] - ma * ma;
    const double vb = bb.v[i] - mb * mb;
    const double cov = ab.v[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.v.size());
}

double dice(const Volume3& a, const Volume3& b, double tau) {
  return dice(a, b, tau, Mask3(a.dims(), true));
}

double dice(const Volume3& a, const Volume3& b, double tau, const Mask3& region) {
  require_same_dims(a, b);
  if (!(region.dims() == a.dims())) throw Error(ErrorCode::Dimension, "region differs from volume shape");
  const Mask3 ma = threshold_mask(a, tau);
  const Mask3 mb = threshold_mask(b, tau);
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < ma.bits().size(); ++i) {
    if (!region.bits()[i]) continue;
    const bool x = ma.bits()[i], y = mb.bits()[i];
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double overall(double psnr_db, double ssim, double dice) {
  if (!std::isfinite(psnr_db)) throw Error(ErrorCode::UndefinedScore, "overall score needs a finite psnr");
  return 100.0 * (psnr_db / 20.0 + dice + ssim) / 3.0;
}

MetricReport evaluate(const Volume3& a, const Volume3& b, double tau, const SsimConfig& cfg) {
  MetricReport r;
  r.psnr_db = psnr(a, b);
  r.ssim = ssim3(a, b, cfg);
  r.dice = dice(a, b, tau);
  if (std::isfinite(r.psnr_db)) r.overall_pct = overall(r.psnr_db, r.ssim, r.dice);
  return r;
}

}  // namespace oral3d
