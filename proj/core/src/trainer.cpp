#include "stagan/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "stagan/error.hpp"
#include "stagan/synthdata.hpp"

namespace fs = std::filesystem;
namespace F = torch::nn::functional;
using nlohmann::json;

namespace stagan {

namespace {

torch::optim::AdamOptions adam_options(const TrainConfig& c) {
  return torch::optim::AdamOptions(c.learning_rate).betas({c.beta1, c.beta2});
}

std::vector<torch::Tensor> values(const NamedTensors& named) {
  std::vector<torch::Tensor> out;
  for (const auto& [n, t] : named) out.push_back(t);
  return out;
}

void check_finite(const torch::Tensor& t, const std::string& term) {
  if (!std::isfinite(t.item<double>())) throw NumericError("non-finite discriminator loss", term);
}

// Adam moments of every parameter in `named`, as "optim.<name>.exp_avg" / ".exp_avg_sq".
void capture_optimizer(const torch::optim::Adam& opt, const NamedTensors& named, Checkpoint& ckpt) {
  for (const auto& [name, p] : named) {
    const auto it = opt.state().find(p.unsafeGetTensorImpl());
    if (it == opt.state().end()) continue;
    const auto& st = static_cast<const torch::optim::AdamParamState&>(*it->second);
    ckpt.tensors.emplace_back("optim." + name + ".exp_avg", st.exp_avg().detach().clone());
    ckpt.tensors.emplace_back("optim." + name + ".exp_avg_sq", st.exp_avg_sq().detach().clone());
    ckpt.optimizer_steps[name] = st.step();
  }
}

void restore_optimizer(torch::optim::Adam& opt, const NamedTensors& named, const Checkpoint& ckpt) {
  std::vector<std::string> missing;
  for (const auto& [name, p] : named) {
    if (!ckpt.optimizer_steps.contains(name)) continue;
    const auto* m = ckpt.find("optim." + name + ".exp_avg");
    const auto* v = ckpt.find("optim." + name + ".exp_avg_sq");
    if (!m || !v) {
      missing.push_back("optim." + name);
      continue;
    }
    if (m->sizes() != p.sizes() || v->sizes() != p.sizes()) {
      throw ShapeMismatchError("optimizer moments for " + name + " do not match the parameter shape");
    }
    auto st = std::make_unique<torch::optim::AdamParamState>();
    st->step(ckpt.optimizer_steps[name].get<std::int64_t>());
    st->exp_avg(m->to(p.dtype()).clone());
    st->exp_avg_sq(v->to(p.dtype()).clone());
    opt.state()[p.unsafeGetTensorImpl()] = std::move(st);
  }
  if (!missing.empty()) throw MissingParameterError("checkpoint lacks optimizer moments", missing);
}

}  // namespace

Trainer::Trainer(TrainConfig config, std::vector<PairedSample> train_set)
    : config_(std::move(config)), data_(std::move(train_set)) {
  config_.validate();
  if (data_.empty()) throw DataError("training split is empty");
  SampleExpectations expect;
  expect.image_size = config_.generator.image_size;
  for (const auto& sample : data_) {
    const auto result = validate_paired_sample(sample, expect);
    if (!result.ok()) throw DataError("invalid training clip " + sample.clip_id, result.violations);
    if (sample.ego.length() < config_.clip_length) {
      throw DataError("clip " + sample.clip_id + " has " + std::to_string(sample.ego.length()) +
                      " frames, fewer than clip_length " + std::to_string(config_.clip_length));
    }
  }

  model_ = build_model(config_);
  opt_g_ = std::make_unique<torch::optim::Adam>(values(model_.generator_parameters()), adam_options(config_));
  opt_d_ = std::make_unique<torch::optim::Adam>(values(model_.discriminator_parameters()), adam_options(config_));
  rng_.seed(config_.seed);

  if (!config_.log_path.empty()) {
    const fs::path p(config_.log_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    log_.open(p, std::ios::trunc);
    if (!log_) throw IoError("cannot open training log", config_.log_path);
  }
}

std::uint64_t Trainer::uniform(std::uint64_t n) { return rng_() % n; }

Batch Trainer::next_batch() {
  const int T = config_.clip_length;
  const int size = config_.generator.image_size;
  std::vector<torch::Tensor> xs, ys, ss;
  for (int b = 0; b < config_.batch_size; ++b) {
    if (cursor_ >= order_.size()) {
      order_.resize(data_.size());
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[uniform(i)]);
      cursor_ = 0;
    }
    const auto& sample = data_[order_[cursor_++]];
    const auto offset = static_cast<std::int64_t>(uniform(sample.ego.length() - T + 1));
    auto x = sample.exo.tensor().slice(0, offset, offset + T);
    auto y = sample.ego.tensor().slice(0, offset, offset + T);
    auto s = sample.sem.tensor().slice(0, offset, offset + T);

    if (config_.augment) {
      if (uniform(2)) {
        x = x.flip({3});
        y = y.flip({3});
        s = s.flip({3});
      }
      // Enlarge by 1/8 and crop back, the same window for all three views.
      const int big = size + size / 8;
      const auto ox = static_cast<std::int64_t>(uniform(big - size + 1));
      const auto oy = static_cast<std::int64_t>(uniform(big - size + 1));
      auto crop = [&](const torch::Tensor& t, bool nearest) {
        auto opts = F::InterpolateFuncOptions().size(std::vector<std::int64_t>{big, big});
        if (nearest) {
          opts.mode(torch::kNearest);
        } else {
          opts.mode(torch::kBilinear).align_corners(false);
        }
        return F::interpolate(t, opts).slice(2, oy, oy + size).slice(3, ox, ox + size);
      };
      x = crop(x, false);
      y = crop(y, false);
      s = crop(s, true);
    }
    xs.push_back(x);
    ys.push_back(y);
    ss.push_back(s);
  }
  return {torch::stack(xs), torch::stack(ys), torch::stack(ss)};
}

GeneratorLossParts generator_objective(const StaganModel& model, const Batch& batch, const Synthesis& synth) {
  const auto& cfg = model.config;
  const auto d_s = as_spatial_critic(model.d_spatial);
  const TemporalCritic d_t = model.d_temporal ? as_temporal_critic(model.d_temporal) : TemporalCritic{};
  const auto form = cfg.adversarial_form;

  GeneratorLossParts parts;
  for (const auto& seq : synth.bundle.sequences) {
    auto term = branch_generator_loss(seq.tag, d_s, batch.x, batch.y, seq.frames, cfg.weights, form);
    switch (seq.tag) {
      case Branch::kTemporalDown: parts.temporal_down = term; break;
      case Branch::kTemporalUp: parts.temporal_up = term; break;
      case Branch::kSpatialDown: parts.spatial_down = term; break;
      case Branch::kSpatialUp: parts.spatial_up = term; break;
    }
  }
  const auto adv = adversarial_generator_terms(d_s, d_t, batch.x, batch.y, synth.frames, cfg.weights, form);
  parts.adv_spatial = adv.gen_spatial;
  parts.adv_temporal = adv.gen_temporal;
  parts.reconstruction = reconstruction_loss(batch.y, synth.frames, cfg.weights.lambda_r);
  return parts;
}

DiscriminatorObjective discriminator_objective(const StaganModel& model, const Batch& batch, const Synthesis& synth) {
  const auto& cfg = model.config;
  const auto d_s = as_spatial_critic(model.d_spatial);
  const TemporalCritic d_t = model.d_temporal ? as_temporal_critic(model.d_temporal) : TemporalCritic{};
  const auto adv = adversarial_discriminator_terms(d_s, d_t, batch.x, batch.y, synth.frames, cfg.weights);
  DiscriminatorObjective out{adv.d_spatial, adv.d_temporal};
  if (cfg.discriminator_on_branches) {
    for (const auto& seq : synth.bundle.sequences) {
      out.spatial = out.spatial + branch_discriminator_loss(seq.tag, d_s, batch.x, batch.y, seq.frames, cfg.weights);
    }
  }
  return out;
}

std::pair<double, std::optional<double>> Trainer::discriminator_update(const Batch& batch, const Synthesis& synth) {
  opt_d_->zero_grad();
  const auto obj = discriminator_objective(model_, batch, synth);
  check_finite(obj.spatial, "d_spatial");
  auto loss = obj.spatial;
  std::optional<double> temporal;
  if (obj.temporal.defined()) {
    check_finite(obj.temporal, "d_temporal");
    loss = loss + obj.temporal;
    temporal = obj.temporal.item<double>();
  }
  loss.backward();
  opt_d_->step();
  return {obj.spatial.item<double>(), temporal};
}

LossReport Trainer::generator_update(const Batch& batch, const Synthesis& synth) {
  opt_g_->zero_grad();
  auto total = total_generator_loss(generator_objective(model_, batch, synth));
  total.value.backward();
  opt_g_->step();
  // The generator objective also reaches the discriminators; drop those gradients.
  opt_d_->zero_grad();
  return total.report;
}

LossReport Trainer::step() {
  const auto batch = next_batch();
  const auto synth = synthesize_sequence(model_, batch.x, batch.s);
  const auto [d_spatial, d_temporal] = discriminator_update(batch, synth);
  auto report = generator_update(batch, synth);
  report.d_spatial = d_spatial;
  report.d_temporal = d_temporal;
  ++step_;

  if (log_.is_open()) {
    auto line = report.to_json();
    line["step"] = step_;
    log_ << line.dump() << '\n';
    log_.flush();
  }
  if (config_.checkpoint_every > 0 && !config_.checkpoint_dir.empty() && step_ % config_.checkpoint_every == 0) {
    write_checkpoint();
  }
  return report;
}

std::int64_t Trainer::total_steps() const {
  if (config_.max_steps) return *config_.max_steps;
  const auto n = static_cast<std::int64_t>(data_.size());
  const auto per_epoch = (n + config_.batch_size - 1) / config_.batch_size;
  return per_epoch * config_.epochs;
}

std::vector<LossReport> Trainer::run() {
  std::vector<LossReport> reports;
  const auto total = total_steps();
  while (step_ < total) reports.push_back(step());
  if (!config_.checkpoint_dir.empty()) write_checkpoint();
  return reports;
}

Checkpoint Trainer::checkpoint() const {
  auto ckpt = capture_model(model_, step_);
  capture_optimizer(*opt_g_, model_.generator_parameters(), ckpt);
  capture_optimizer(*opt_d_, model_.discriminator_parameters(), ckpt);
  std::ostringstream mt;
  mt << rng_;
  ckpt.rng_state = json{{"mt19937_64", mt.str()}, {"order", order_}, {"cursor", cursor_}}.dump();
  return ckpt;
}

void Trainer::resume(const Checkpoint& ckpt) {
  restore_model(model_, ckpt);
  restore_optimizer(*opt_g_, model_.generator_parameters(), ckpt);
  restore_optimizer(*opt_d_, model_.discriminator_parameters(), ckpt);
  step_ = ckpt.step;
  if (!ckpt.rng_state.empty()) {
    try {
      const auto j = json::parse(ckpt.rng_state);
      std::istringstream mt(j.at("mt19937_64").get<std::string>());
      mt >> rng_;
      order_ = j.at("order").get<std::vector<std::size_t>>();
      cursor_ = j.at("cursor").get<std::size_t>();
    } catch (const json::exception& e) {
      throw ManifestError(std::string("checkpoint RNG state is malformed: ") + e.what());
    }
  }
}

void Trainer::write_checkpoint() {
  save_checkpoint(checkpoint(), fs::path(config_.checkpoint_dir) / "latest");
}

TrainResult train(const TrainConfig& config, int synth_train_clips, int synth_test_clips) {
  config.validate();
  const fs::path root(config.data_root);
  if (config.data_root.empty()) throw ConfigError("data_root is not set");
  if (config.scene && !fs::exists(root / "manifest.json")) {
    generate_dataset(*config.scene, synth_train_clips, synth_test_clips, root);
  }
  auto samples = load_paired_dataset(root, config.train_split, {});
  Trainer trainer(config, std::move(samples));
  TrainResult result;
  result.reports = trainer.run();
  if (!config.checkpoint_dir.empty()) result.checkpoint = fs::path(config.checkpoint_dir) / "latest";
  return result;
}

}  // namespace stagan
