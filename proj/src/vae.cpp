#include "latentbench/vae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "latentbench/error.hpp"
#include "latentbench/kernels.hpp"
#include "latentbench/log.hpp"
#include "latentbench/rng.hpp"

namespace latentbench {

VaeParams VaeParams::zeros(std::size_t p, std::size_t d, std::size_t hidden) {
  VaeParams v;
  v.w1 = Matrix(hidden, p);
  v.b1.assign(hidden, 0.0);
  v.w_mu = Matrix(d, hidden);
  v.b_mu.assign(d, 0.0);
  v.w_logvar = Matrix(d, hidden);
  v.b_logvar.assign(d, 0.0);
  v.w2 = Matrix(hidden, d);
  v.b2.assign(hidden, 0.0);
  v.w_out = Matrix(p, hidden);
  v.b_out.assign(p, 0.0);
  return v;
}

std::vector<std::span<double>> VaeParams::tensors() {
  return {w1.values(),       b1, w_mu.values(), b_mu, w_logvar.values(),
          b_logvar,          w2.values(),       b2,   w_out.values(),
          b_out};
}

std::vector<std::span<const double>> VaeParams::tensors() const {
  return {w1.values(),       b1, w_mu.values(), b_mu, w_logvar.values(),
          b_logvar,          w2.values(),       b2,   w_out.values(),
          b_out};
}

void VaeTrainConfig::validate() const {
  if (!(learning_rate > 0) || !(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1) ||
      !(epsilon > 0) || batch_size == 0 || hidden == 0)
    throw ConfigError("vae: invalid training configuration");
}

nlohmann::json to_json(const VaeTrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},   {"beta2", c.beta2},
          {"epsilon", c.epsilon},             {"batch_size", c.batch_size},
          {"epochs", c.epochs},               {"patience", c.patience},
          {"hidden", c.hidden},               {"seed", c.seed}};
}

VaeTrainConfig vae_config_from_json(const nlohmann::json& j) {
  VaeTrainConfig c;
  try {
    c.learning_rate = j.at("learning_rate").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.patience = j.at("patience").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("vae config: ") + e.what());
  }
  return c;
}

double gaussian_kl(double mu, double logvar) noexcept {
  return -0.5 * (1.0 + logvar - mu * mu - std::exp(logvar));
}

double bernoulli_cross_entropy(double x, double o) noexcept {
  return std::max(o, 0.0) - x * o + std::log1p(std::exp(-std::abs(o)));
}

namespace {

struct Workspace {
  Matrix a1, h1, mu, logvar, sigma, z, a2, h2, out;
  Matrix d_out, d_h2, d_z, d_mu, d_logvar, d_h1, transposed;

  void resize(std::size_t b, std::size_t p, std::size_t d, std::size_t h) {
    if (a1.rows() == b && a1.cols() == h && mu.cols() == d && out.cols() == p) return;
    a1 = h1 = a2 = h2 = d_h2 = d_h1 = Matrix(b, h);
    mu = logvar = sigma = z = d_z = d_mu = d_logvar = Matrix(b, d);
    out = d_out = Matrix(b, p);
  }
};

// y = x w^T + b
void affine(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
  kernels::gemm_nt(x.data(), w.data(), y.data(), x.rows(), w.rows(), x.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) kernels::axpy(1.0, b, y.row(i));
}

void relu(const Matrix& a, Matrix& h) {
  const auto src = a.values();
  auto dst = h.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
}

// dw += dy^T x, db += colsum(dy)
void accumulate_weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw,
                            std::vector<double>& db, Matrix& scratch) {
  scratch = dy.transposed();
  kernels::gemm_nn(scratch.data(), x.data(), dw.data(), dy.cols(), x.cols(), dy.rows(), true);
  for (std::size_t i = 0; i < dy.rows(); ++i) kernels::axpy(1.0, dy.row(i), db);
}

ElboParts loss_impl(const VaeParams& prm, const Matrix& x, FeatureKind kind, const Matrix& noise,
                    VaeParams* grad, Workspace& ws) {
  const std::size_t b = x.rows(), p = prm.p(), d = prm.d(), h = prm.hidden();
  if (x.cols() != p) throw ConfigError("vae: batch width does not match the model");
  if (noise.rows() != b || noise.cols() != d) throw ConfigError("vae: noise shape must be batch x d");
  ws.resize(b, p, d, h);

  affine(x, prm.w1, prm.b1, ws.a1);
  relu(ws.a1, ws.h1);
  affine(ws.h1, prm.w_mu, prm.b_mu, ws.mu);
  affine(ws.h1, prm.w_logvar, prm.b_logvar, ws.logvar);
  for (std::size_t i = 0; i < b * d; ++i) {
    ws.sigma.data()[i] = std::exp(0.5 * ws.logvar.data()[i]);
    ws.z.data()[i] = ws.mu.data()[i] + ws.sigma.data()[i] * noise.data()[i];
  }
  affine(ws.z, prm.w2, prm.b2, ws.a2);
  relu(ws.a2, ws.h2);
  affine(ws.h2, prm.w_out, prm.b_out, ws.out);

  const bool bernoulli = kind == FeatureKind::image_pixels_unit_interval;
  double recon = 0.0, kl = 0.0;
  for (std::size_t i = 0; i < b * p; ++i) {
    const double o = ws.out.data()[i], xi = x.data()[i];
    if (bernoulli) {
      recon += bernoulli_cross_entropy(xi, o);
    } else {
      recon += 0.5 * (xi - o) * (xi - o);
    }
  }
  for (std::size_t i = 0; i < b * d; ++i) {
    const double m = ws.mu.data()[i], lv = ws.logvar.data()[i];
    kl += gaussian_kl(m, lv);
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  ElboParts parts{recon * inv_b, kl * inv_b, (recon + kl) * inv_b};
  if (!grad) return parts;

  *grad = VaeParams::zeros(p, d, h);
  for (std::size_t i = 0; i < b * p; ++i) {
    const double o = ws.out.data()[i], xi = x.data()[i];
    const double pred = bernoulli ? 1.0 / (1.0 + std::exp(-o)) : o;
    ws.d_out.data()[i] = (pred - xi) * inv_b;
  }
  accumulate_weight_grad(ws.d_out, ws.h2, grad->w_out, grad->b_out, ws.transposed);
  kernels::gemm_nn(ws.d_out.data(), prm.w_out.data(), ws.d_h2.data(), b, h, p);
  for (std::size_t i = 0; i < b * h; ++i)
    if (ws.a2.data()[i] <= 0.0) ws.d_h2.data()[i] = 0.0;
  accumulate_weight_grad(ws.d_h2, ws.z, grad->w2, grad->b2, ws.transposed);
  kernels::gemm_nn(ws.d_h2.data(), prm.w2.data(), ws.d_z.data(), b, d, h);
  for (std::size_t i = 0; i < b * d; ++i) {
    const double dz = ws.d_z.data()[i];
    ws.d_mu.data()[i] = dz + ws.mu.data()[i] * inv_b;
    ws.d_logvar.data()[i] = 0.5 * dz * noise.data()[i] * ws.sigma.data()[i] +
                            0.5 * (std::exp(ws.logvar.data()[i]) - 1.0) * inv_b;
  }
  accumulate_weight_grad(ws.d_mu, ws.h1, grad->w_mu, grad->b_mu, ws.transposed);
  accumulate_weight_grad(ws.d_logvar, ws.h1, grad->w_logvar, grad->b_logvar, ws.transposed);
  kernels::gemm_nn(ws.d_mu.data(), prm.w_mu.data(), ws.d_h1.data(), b, h, d);
  kernels::gemm_nn(ws.d_logvar.data(), prm.w_logvar.data(), ws.d_h1.data(), b, h, d, true);
  for (std::size_t i = 0; i < b * h; ++i)
    if (ws.a1.data()[i] <= 0.0) ws.d_h1.data()[i] = 0.0;
  accumulate_weight_grad(ws.d_h1, x, grad->w1, grad->b1, ws.transposed);
  return parts;
}

struct Adam {
  VaeParams m, v;
  std::size_t step = 0;
  const VaeTrainConfig& cfg;

  Adam(const VaeParams& like, const VaeTrainConfig& c)
      : m(VaeParams::zeros(like.p(), like.d(), like.hidden())),
        v(VaeParams::zeros(like.p(), like.d(), like.hidden())),
        cfg(c) {}

  void update(VaeParams& params, const VaeParams& grad) {
    ++step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    auto pt = params.tensors();
    auto gt = grad.tensors();
    auto mt = m.tensors();
    auto vt = v.tensors();
    for (std::size_t t = 0; t < pt.size(); ++t) {
      for (std::size_t i = 0; i < pt[t].size(); ++i) {
        const double g = gt[t][i];
        mt[t][i] = cfg.beta1 * mt[t][i] + (1.0 - cfg.beta1) * g;
        vt[t][i] = cfg.beta2 * vt[t][i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = mt[t][i] / c1;
        const double vhat = vt[t][i] / c2;
        pt[t][i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
      }
    }
  }
};

void fill_normal(Matrix& m, Rng& rng) {
  for (double& v : m.values()) v = rng.normal();
}

}  // namespace

ElboParts vae_loss(const VaeParams& params, const Matrix& batch, FeatureKind kind,
                   const Matrix& noise, VaeParams* grad) {
  Workspace ws;
  return loss_impl(params, batch, kind, noise, grad, ws);
}

VaeParams vae_init(std::size_t p, std::size_t d, std::size_t hidden, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "vae.init"));
  VaeParams v = VaeParams::zeros(p, d, hidden);
  auto fill = [&rng](Matrix& w) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (double& x : w.values()) x = rng.uniform(-bound, bound);
  };
  fill(v.w1);
  fill(v.w_mu);
  fill(v.w_logvar);
  fill(v.w2);
  fill(v.w_out);
  return v;
}

VaeFit vae_fit(const Matrix& rows, FeatureKind kind, std::size_t d, const VaeTrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = rows.rows(), p = rows.cols();
  if (n < cfg.batch_size)
    throw ConfigError("vae_fit: " + std::to_string(n) + " rows is fewer than batch size " +
                      std::to_string(cfg.batch_size));
  if (d == 0) throw ConfigError("vae_fit: latent dimension must be positive");
  if (!all_finite(rows.values())) throw ConfigError("vae_fit: non-finite input");

  VaeFit fit;
  VaeParams params = vae_init(p, d, cfg.hidden, cfg.seed);
  Rng shuffle_rng(derive_seed(cfg.seed, "vae.shuffle"));
  Rng noise_rng(derive_seed(cfg.seed, "vae.noise"));
  Workspace ws;

  auto batches_of = [&](const std::vector<std::size_t>& order, auto&& body) {
    for (std::size_t start = 0, bi = 0; start < n; start += cfg.batch_size, ++bi) {
      const std::size_t bsz = std::min(cfg.batch_size, n - start);
      std::span<const std::size_t> idx(order.data() + start, bsz);
      body(rows.select_rows(idx), bi);
    }
  };

  // Epoch 0: the untrained network over the data in row order.
  {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng eval_noise(derive_seed(cfg.seed, "vae.noise.initial"));
    EpochStats s{0, 0, 0, 0};
    batches_of(order, [&](const Matrix& batch, std::size_t) {
      Matrix noise(batch.rows(), d);
      fill_normal(noise, eval_noise);
      const auto parts = loss_impl(params, batch, kind, noise, nullptr, ws);
      const double w = static_cast<double>(batch.rows());
      s.reconstruction += parts.reconstruction * w;
      s.kl += parts.kl * w;
      s.total += parts.total * w;
    });
    s.reconstruction /= static_cast<double>(n);
    s.kl /= static_cast<double>(n);
    s.total /= static_cast<double>(n);
    if (!std::isfinite(s.total)) throw NumericError("vae_fit: initial loss is not finite");
    fit.curve.push_back(s);
  }

  fit.params = params;
  double best = fit.curve.front().total;
  std::size_t since_best = 0;
  Adam adam(params, cfg);
  VaeParams grad;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto order = shuffle_rng.permutation(n);
    EpochStats s{epoch, 0, 0, 0};
    batches_of(order, [&](const Matrix& batch, std::size_t bi) {
      Matrix noise(batch.rows(), d);
      fill_normal(noise, noise_rng);
      const auto parts = loss_impl(params, batch, kind, noise, &grad, ws);
      if (!std::isfinite(parts.total))
        throw NumericError("vae_fit: non-finite loss in epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(bi) + " (last finite epoch " +
                           std::to_string(epoch - 1) + ")");
      if (parts.kl < -1e-12)
        throw NumericError("vae_fit: negative KL term in epoch " + std::to_string(epoch));
      adam.update(params, grad);
      const double w = static_cast<double>(batch.rows());
      s.reconstruction += parts.reconstruction * w;
      s.kl += parts.kl * w;
      s.total += parts.total * w;
    });
    s.reconstruction /= static_cast<double>(n);
    s.kl /= static_cast<double>(n);
    s.total /= static_cast<double>(n);
    fit.curve.push_back(s);
    if (s.total < best) {
      best = s.total;
      fit.params = params;
      fit.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      log().debug("vae_fit: early stop at epoch {} (best {})", epoch, fit.best_epoch);
      break;
    }
  }
  return fit;
}

Matrix vae_encode(const VaeParams& params, const Matrix& rows) {
  if (rows.cols() != params.p())
    throw ConfigError("vae_encode: rows have width " + std::to_string(rows.cols()) +
                      ", model expects " + std::to_string(params.p()));
  const std::size_t n = rows.rows();
  constexpr std::size_t chunk = 256;
  Matrix out(n, params.d());
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t len = std::min(chunk, n - start);
    Matrix x(len, rows.cols());
    std::copy(rows.data() + start * rows.cols(), rows.data() + (start + len) * rows.cols(),
              x.data());
    Matrix a(len, params.hidden()), h(len, params.hidden()), mu(len, params.d());
    affine(x, params.w1, params.b1, a);
    relu(a, h);
    affine(h, params.w_mu, params.b_mu, mu);
    std::copy(mu.data(), mu.data() + mu.size(), out.data() + start * params.d());
  }
  return out;
}

void write_training_curve(const std::vector<EpochStats>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write training curve " + path);
  out << "epoch,reconstruction,kl,total\n";
  char buf[128];
  for (const auto& s : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", s.epoch, s.reconstruction, s.kl,
                  s.total);
    out << buf;
  }
}

void save_vae(const VaeParams& params, const VaeTrainConfig& cfg, FeatureKind kind,
              ModelWriter& out) {
  out.matrix("W1__", params.w1);
  out.vector("B1__", params.b1);
  out.matrix("WMU_", params.w_mu);
  out.vector("BMU_", params.b_mu);
  out.matrix("WLV_", params.w_logvar);
  out.vector("BLV_", params.b_logvar);
  out.matrix("W2__", params.w2);
  out.vector("B2__", params.b2);
  out.matrix("WOUT", params.w_out);
  out.vector("BOUT", params.b_out);
  nlohmann::json meta{{"config", to_json(cfg)}, {"feature_kind", std::string(to_string(kind))}};
  out.text("CONF", meta.dump());
}

LoadedVae load_vae(const ModelReader& in) {
  in.expect(ModelKind::vae);
  LoadedVae v;
  v.params.w1 = in.matrix("W1__");
  v.params.b1 = in.vector("B1__");
  v.params.w_mu = in.matrix("WMU_");
  v.params.b_mu = in.vector("BMU_");
  v.params.w_logvar = in.matrix("WLV_");
  v.params.b_logvar = in.vector("BLV_");
  v.params.w2 = in.matrix("W2__");
  v.params.b2 = in.vector("B2__");
  v.params.w_out = in.matrix("WOUT");
  v.params.b_out = in.vector("BOUT");
  const auto meta = nlohmann::json::parse(in.text("CONF"));
  v.config = vae_config_from_json(meta.at("config"));
  v.kind = meta.at("feature_kind").get<std::string>() == "image_pixels_unit_interval"
               ? FeatureKind::image_pixels_unit_interval
               : FeatureKind::tabular_standardized;
  const auto& p = v.params;
  if (p.w_mu.cols() != p.hidden() || p.w2.cols() != p.d() || p.w_out.rows() != p.p())
    throw DataError("vae model: inconsistent section shapes");
  return v;
}

}  // namespace latentbench
