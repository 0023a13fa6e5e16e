#include "stagan/metrics.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Dense>

#include "stagan/error.hpp"
#include "stagan/networks.hpp"
#include "stagan/synthdata.hpp"

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace stagan {

namespace {

void check_pair(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.dim() != 3 || a.sizes() != b.sizes()) throw ShapeError(std::string(what) + ": inputs must be equal [C, H, W]");
}

// Normalised 1-D Gaussian; the 2-D window is its outer product.
torch::Tensor gaussian_taps(int size, double sigma) {
  auto x = torch::arange(size, torch::kFloat64) - (size - 1) / 2.0;
  auto g = torch::exp(-(x * x) / (2 * sigma * sigma));
  return g / g.sum();
}

double decibels(double mean_error) {
  if (mean_error <= 0.0) return kDecibelCap;
  return std::min(kDecibelCap, 10.0 * std::log10(1.0 / mean_error));
}

Eigen::MatrixXd to_eigen(const torch::Tensor& t) {
  auto c = t.to(torch::kFloat64).contiguous();
  Eigen::MatrixXd m(c.size(0), c.size(1));
  auto acc = c.accessor<double, 2>();
  for (int64_t i = 0; i < c.size(0); ++i) {
    for (int64_t j = 0; j < c.size(1); ++j) m(i, j) = acc[i][j];
  }
  return m;
}

// Symmetric PSD square root with negative eigenvalues clipped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

torch::Tensor to_metric_space(const torch::Tensor& pixels) { return (pixels.to(torch::kFloat64) + 1.0) / 2.0; }

double ssim(const torch::Tensor& a, const torch::Tensor& b) {
  check_pair(a, b, "ssim");
  const auto h = a.size(1), w = a.size(2);
  int win = static_cast<int>(std::min<int64_t>({11, h, w}));
  if (win % 2 == 0) --win;
  const auto c = a.size(0);
  const auto x = a.to(torch::kFloat64);
  const auto y = b.to(torch::kFloat64);
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);

  // All five local moments in one separable pass (rows, then columns).
  const auto taps = gaussian_taps(win, 1.5);
  const auto n = 5 * c;
  const auto stacked = torch::cat({x, y, x * x, y * y, x * y}).unsqueeze(0);
  const auto rows = F::conv2d(stacked, taps.view({1, 1, 1, win}).expand({n, 1, 1, win}).contiguous(),
                              F::Conv2dFuncOptions().groups(n));
  const auto moments = F::conv2d(rows, taps.view({1, 1, win, 1}).expand({n, 1, win, 1}).contiguous(),
                                 F::Conv2dFuncOptions().groups(n))
                           .squeeze(0)
                           .split(c);
  const auto& mu_x = moments[0];
  const auto& mu_y = moments[1];
  const auto var_x = moments[2] - mu_x * mu_x;
  const auto var_y = moments[3] - mu_y * mu_y;
  const auto cov = moments[4] - mu_x * mu_y;
  const auto map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
  return map.mean().item<double>();
}

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
  check_pair(a, b, "psnr");
  const double mse = (a.to(torch::kFloat64) - b.to(torch::kFloat64)).pow(2).mean().item<double>();
  return decibels(mse);
}

double sharpness_difference(const torch::Tensor& a, const torch::Tensor& b) {
  check_pair(a, b, "sharpness_difference");
  if (a.size(1) < 2 || a.size(2) < 2) throw ShapeError("sharpness_difference needs at least 2x2 images");
  auto grad_sum = [](const torch::Tensor& t) {
    const auto x = t.to(torch::kFloat64);
    const auto h = x.size(1), w = x.size(2);
    const auto base = x.narrow(1, 0, h - 1).narrow(2, 0, w - 1);
    const auto gh = (x.narrow(1, 0, h - 1).narrow(2, 1, w - 1) - base).abs();
    const auto gv = (x.narrow(1, 1, h - 1).narrow(2, 0, w - 1) - base).abs();
    return gh + gv;
  };
  const double diff = (grad_sum(a) - grad_sum(b)).abs().mean().item<double>();
  return decibels(diff);
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ShapeError("kl_divergence: distributions differ in size");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    sum += p[i] * (std::log(std::max(p[i], kKlEpsilon)) - std::log(std::max(q[i], kKlEpsilon)));
  }
  return sum;
}

std::pair<double, double> kl_score(const torch::Tensor& gen_probs, const torch::Tensor& real_probs) {
  if (gen_probs.dim() != 2 || gen_probs.sizes() != real_probs.sizes()) {
    throw ShapeError("kl_score: generated and real probability sets must be paired [N, C]");
  }
  const auto n = gen_probs.size(0);
  if (n == 0) throw ShapeError("kl_score: empty input");
  const auto g = gen_probs.to(torch::kFloat64).contiguous();
  const auto r = real_probs.to(torch::kFloat64).contiguous();
  std::vector<double> values;
  for (int64_t i = 0; i < n; ++i) {
    const auto gi = g[i], ri = r[i];
    std::vector<double> p(gi.data_ptr<double>(), gi.data_ptr<double>() + gi.numel());
    std::vector<double> q(ri.data_ptr<double>(), ri.data_ptr<double>() + ri.numel());
    values.push_back(kl_divergence(p, q));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

double fid(const torch::Tensor& gen_features, const torch::Tensor& real_features) {
  if (gen_features.dim() != 2 || real_features.dim() != 2 || gen_features.size(1) != real_features.size(1)) {
    throw ShapeError("fid: feature sets must be [N, D] with equal D");
  }
  if (gen_features.size(0) < 2 || real_features.size(0) < 2) throw ShapeError("fid: need at least 2 samples per set");

  auto moments = [](const Eigen::MatrixXd& x) {
    const Eigen::RowVectorXd mu = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mu;
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    return std::make_pair(mu, cov);
  };
  const auto [mu_g, cov_g] = moments(to_eigen(gen_features));
  const auto [mu_r, cov_r] = moments(to_eigen(real_features));

  // Tr((S_g S_r)^1/2) = Tr((S_g^1/2 S_r S_g^1/2)^1/2), the latter symmetric PSD.
  const Eigen::MatrixXd root_g = psd_sqrt(cov_g);
  const Eigen::MatrixXd inner = root_g * cov_r * root_g;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double trace_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double value = (mu_g - mu_r).squaredNorm() + cov_g.trace() + cov_r.trace() - 2.0 * trace_sqrt;
  return std::max(0.0, value);
}

TopKAccuracy topk_accuracy(const torch::Tensor& gen_probs, const torch::Tensor& labels,
                           const torch::Tensor& real_probs, int k) {
  if (gen_probs.dim() != 2 || gen_probs.sizes() != real_probs.sizes() || labels.dim() != 1 ||
      labels.size(0) != gen_probs.size(0)) {
    throw ShapeError("topk_accuracy: expected paired [N, C] probabilities and [N] labels");
  }
  const auto n = gen_probs.size(0);
  if (n == 0) throw ShapeError("topk_accuracy: empty input");
  const auto kk = std::clamp<int64_t>(k, 1, gen_probs.size(1));
  const auto top = std::get<1>(gen_probs.topk(kk, 1));
  const auto hit = (top == labels.to(torch::kLong).unsqueeze(1)).any(1);
  const auto confident = std::get<0>(real_probs.max(1)) > 0.5;

  TopKAccuracy acc;
  acc.all = 100.0 * hit.sum().item<int64_t>() / static_cast<double>(n);
  const auto n_conf = confident.sum().item<int64_t>();
  if (n_conf > 0) acc.confident = 100.0 * (hit & confident).sum().item<int64_t>() / static_cast<double>(n_conf);
  return acc;
}

EmbeddingModelImpl::EmbeddingModelImpl(int n_classes, int width) : n_classes_(n_classes) {
  if (n_classes < 2) throw ConfigError("embedding model needs at least 2 classes");
  body_ = register_module(
      "body", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(3, width, 4).stride(2).padding(1)),
                             nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                             nn::Conv2d(nn::Conv2dOptions(width, 2 * width, 4).stride(2).padding(1)),
                             nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                             nn::Conv2d(nn::Conv2dOptions(2 * width, 4 * width, 4).stride(2).padding(1)),
                             nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
  classifier_ = register_module("classifier", nn::Linear(4 * width, n_classes));
}

torch::Tensor EmbeddingModelImpl::features(const torch::Tensor& frames) {
  return body_->forward(frames).mean({2, 3});
}

torch::Tensor EmbeddingModelImpl::logits(const torch::Tensor& frames) { return classifier_->forward(features(frames)); }

torch::Tensor EmbeddingModelImpl::probabilities(const torch::Tensor& frames) { return torch::softmax(logits(frames), 1); }

EmbeddingModel train_embedding_model(const torch::Tensor& frames, const torch::Tensor& labels, int n_classes,
                                     const EmbeddingTrainOptions& opts) {
  if (frames.dim() != 4 || labels.dim() != 1 || frames.size(0) != labels.size(0) || frames.size(0) == 0) {
    throw ShapeError("train_embedding_model: expected [N, 3, H, W] frames and [N] labels");
  }
  EmbeddingModel model(n_classes);
  init_gan_weights(*model, opts.seed);
  torch::optim::Adam optim(model->parameters(), torch::optim::AdamOptions(opts.learning_rate));
  auto gen = at::make_generator<at::CPUGeneratorImpl>(opts.seed + 1);
  const auto n = frames.size(0);
  const auto targets = labels.to(torch::kLong);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto order = torch::randperm(n, gen, torch::kLong);
    for (int64_t start = 0; start < n; start += opts.batch_size) {
      const auto idx = order.narrow(0, start, std::min<int64_t>(opts.batch_size, n - start));
      optim.zero_grad();
      const auto loss = F::cross_entropy(model->logits(frames.index_select(0, idx)), targets.index_select(0, idx));
      loss.backward();
      optim.step();
    }
  }
  model->eval();
  return model;
}

std::pair<torch::Tensor, torch::Tensor> labelled_ego_frames(const std::vector<PairedSample>& samples) {
  std::vector<torch::Tensor> frames;
  std::vector<int64_t> labels;
  for (const auto& s : samples) {
    for (int64_t t = 0; t < s.ego.length(); ++t) {
      frames.push_back(s.ego.tensor()[t]);
      labels.push_back(ego_frame_label(s.sem.frame(t)));
    }
  }
  if (frames.empty()) throw ShapeError("labelled_ego_frames: no frames");
  return {torch::stack(frames), torch::tensor(labels, torch::kLong)};
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j{{"ssim", ssim},         {"psnr", psnr},         {"sd", sd},           {"kl_mean", kl_mean},
                   {"kl_std", kl_std},     {"fid", fid},           {"top1_all", top1_all}, {"top5_all", top5_all},
                   {"frames", frames}};
  j["top1_conf"] = top1_conf ? nlohmann::json(*top1_conf) : nlohmann::json(nullptr);
  j["top5_conf"] = top5_conf ? nlohmann::json(*top5_conf) : nlohmann::json(nullptr);
  return j;
}

std::string MetricsReport::format_table(const std::string& label) const {
  auto opt = [](const std::optional<double>& v) {
    char buf[16];
    if (!v) return std::string("  n/a");
    std::snprintf(buf, sizeof(buf), "%5.2f", *v);
    return std::string(buf);
  };
  char head[256];
  std::snprintf(head, sizeof(head), "%-12s %7s %8s %8s %15s %9s %15s %15s\n", "Method", "SSIM", "PSNR", "SD", "KL",
                "FID", "Top-1 (%)", "Top-5 (%)");
  char row[256];
  std::snprintf(row, sizeof(row), "%-12s %7.4f %8.4f %8.4f %7.2f +- %5.2f %9.4f %6.2f / %s %6.2f / %s\n",
                label.c_str(), ssim, psnr, sd, kl_mean, kl_std, fid, top1_all, opt(top1_conf).c_str(), top5_all,
                opt(top5_conf).c_str());
  return std::string(head) + row;
}

MetricsReport evaluate_dataset(const SynthesisFn& synthesize, const std::vector<PairedSample>& samples,
                               EmbeddingModel& model) {
  if (samples.empty()) throw ShapeError("evaluate_dataset: no samples");
  torch::NoGradGuard no_grad;
  model->eval();

  MetricsReport report;
  std::vector<torch::Tensor> gen_frames, real_frames;
  std::vector<int64_t> labels;
  double ssim_sum = 0, psnr_sum = 0, sd_sum = 0;
  for (const auto& sample : samples) {
    const Clip generated = synthesize(sample);
    if (generated.tensor().sizes() != sample.ego.tensor().sizes()) {
      throw ShapeError("evaluate_dataset: synthesized clip shape differs from the target for " + sample.clip_id);
    }
    for (int64_t t = 0; t < sample.ego.length(); ++t) {
      const auto g = generated.tensor()[t];
      const auto r = sample.ego.tensor()[t];
      const auto gm = to_metric_space(g), rm = to_metric_space(r);
      ssim_sum += ssim(gm, rm);
      psnr_sum += psnr(gm, rm);
      sd_sum += sharpness_difference(gm, rm);
      gen_frames.push_back(g.to(torch::kFloat32));
      real_frames.push_back(r);
      labels.push_back(ego_frame_label(sample.sem.frame(t)));
    }
  }
  const auto n = static_cast<int64_t>(gen_frames.size());
  report.frames = n;
  report.ssim = ssim_sum / n;
  report.psnr = psnr_sum / n;
  report.sd = sd_sum / n;

  const auto gen = torch::stack(gen_frames);
  const auto real = torch::stack(real_frames);
  const auto gen_probs = model->probabilities(gen);
  const auto real_probs = model->probabilities(real);
  std::tie(report.kl_mean, report.kl_std) = kl_score(gen_probs, real_probs);
  report.fid = n >= 2 ? fid(model->features(gen), model->features(real)) : 0.0;

  const auto label_t = torch::tensor(labels, torch::kLong);
  const auto top1 = topk_accuracy(gen_probs, label_t, real_probs, 1);
  const auto top5 = topk_accuracy(gen_probs, label_t, real_probs, 5);
  report.top1_all = top1.all;
  report.top1_conf = top1.confident;
  report.top5_all = top5.all;
  report.top5_conf = top5.confident;
  return report;
}

}  // namespace stagan
