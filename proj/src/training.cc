// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/training.h"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "nitcg/conditioning.h"
#include "nitcg/error.h"

namespace nitcg::training {

namespace fs = std::filesystem;
using nlohmann::json;
using ad::Tensor;

namespace {

constexpr const char* kPrefixes[] = {"g_ys", "g_sy", "d_s", "d_y"};

std::string objective_name(losses::GanObjective o) {
  return o == losses::GanObjective::kLog ? "log" : "least_squares";
}

losses::GanObjective parse_objective(const std::string& s) {
  if (s == "log") return losses::GanObjective::kLog;
  if (s == "least_squares") return losses::GanObjective::kLeastSquares;
  throw InputError("unknown GAN objective '" + s + "' (expected log or least_squares)");
}

Tensor with_labels(const Tensor& features, const std::vector<std::size_t>& index, std::size_t n_noise) {
  std::vector<cond::DomainLabel> labels;
  for (auto i : index) labels.push_back(cond::make_label(i, n_noise));
  return cond::append_label_rows(features, cond::label_rows_tensor(labels, features.shape()[2]));
}

void check_finite(const losses::LossReport& r, const char* phase, std::uint64_t step) {
  if (r.finite()) return;
  throw NumericError(std::string("non-finite loss in ") + phase + " at step " + std::to_string(step) +
                     "\n" + losses::LossReport::csv_header() + "\n" + r.csv_row(step, 0));
}

}  // namespace

std::string to_string(Mode mode) { return mode == Mode::kNit ? "nit" : "baseline"; }

Mode parse_mode(const std::string& text) {
  if (text == "nit") return Mode::kNit;
  if (text == "baseline") return Mode::kBaseline;
  throw InputError("unknown mode '" + text + "' (expected nit or baseline)");
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw InputError("train config: " + what);
  };
  need(epochs > 0, "epochs must be positive");
  need(batch_size > 0, "batch_size must be positive");
  need(crop_frames > 0, "crop_frames must be positive");
  need(std::isfinite(lr_g) && lr_g >= 0.0, "lr_g must be a finite non-negative number");
  need(std::isfinite(lr_d) && lr_d >= 0.0, "lr_d must be a finite non-negative number");
  need(beta1 >= 0.0 && beta1 < 1.0, "beta1 must lie in [0, 1)");
  need(beta2 >= 0.0 && beta2 < 1.0, "beta2 must lie in [0, 1)");
  need(checkpoint_every > 0, "checkpoint_every must be positive");
  need(adversarial.eps > 0.0f && adversarial.eps < 0.5f, "adversarial eps must lie in (0, 0.5)");
  weights.validate();
  models::GeneratorSpec{1, base_channels, residual_blocks, downsample_factor}.validate();
  models::DiscriminatorSpec{1, d_base_channels, d_layers}.validate();
}

json TrainConfig::to_json() const {
  return {{"mode", to_string(mode)},
          {"seed", seed},
          {"epochs", epochs},
          {"max_steps", max_steps},
          {"batch_size", batch_size},
          {"crop_frames", crop_frames},
          {"lr_g", lr_g},
          {"lr_d", lr_d},
          {"beta1", beta1},
          {"beta2", beta2},
          {"lambda_cyc", weights.lambda_cyc},
          {"lambda_idm", weights.lambda_idm},
          {"idm_decay_epochs", idm_decay_epochs},
          {"objective", objective_name(adversarial.objective)},
          {"non_saturating", adversarial.non_saturating},
          {"adv_eps", adversarial.eps},
          {"mask_label_rows", mask_label_rows},
          {"checkpoint_every", checkpoint_every},
          {"base_channels", base_channels},
          {"residual_blocks", residual_blocks},
          {"downsample_factor", downsample_factor},
          {"d_base_channels", d_base_channels},
          {"d_layers", d_layers}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw InputError("train config: expected an object");
  const json defaults = TrainConfig{}.to_json();
  for (const auto& [k, v] : j.items()) {
    if (!defaults.contains(k)) throw InputError("train config: unknown key '" + k + "'");
  }
  json merged = defaults;
  merged.update(j);
  TrainConfig c;
  try {
    c.mode = parse_mode(merged.at("mode").get<std::string>());
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.epochs = merged.at("epochs").get<std::size_t>();
    c.max_steps = merged.at("max_steps").get<std::size_t>();
    c.batch_size = merged.at("batch_size").get<std::size_t>();
    c.crop_frames = merged.at("crop_frames").get<std::size_t>();
    c.lr_g = merged.at("lr_g").get<double>();
    c.lr_d = merged.at("lr_d").get<double>();
    c.beta1 = merged.at("beta1").get<double>();
    c.beta2 = merged.at("beta2").get<double>();
    c.weights.lambda_cyc = merged.at("lambda_cyc").get<double>();
    c.weights.lambda_idm = merged.at("lambda_idm").get<double>();
    c.idm_decay_epochs = merged.at("idm_decay_epochs").get<std::size_t>();
    c.adversarial.objective = parse_objective(merged.at("objective").get<std::string>());
    c.adversarial.non_saturating = merged.at("non_saturating").get<bool>();
    c.adversarial.eps = merged.at("adv_eps").get<float>();
    c.mask_label_rows = merged.at("mask_label_rows").get<bool>();
    c.checkpoint_every = merged.at("checkpoint_every").get<std::size_t>();
    c.base_channels = merged.at("base_channels").get<std::size_t>();
    c.residual_blocks = merged.at("residual_blocks").get<std::size_t>();
    c.downsample_factor = merged.at("downsample_factor").get<std::size_t>();
    c.d_base_channels = merged.at("d_base_channels").get<std::size_t>();
    c.d_layers = merged.at("d_layers").get<std::size_t>();
  } catch (const json::exception& e) {
    throw InputError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::size_t steps_per_epoch(std::size_t clean_pool, std::size_t noisy_pool, std::size_t batch) {
  if (batch == 0) throw InputError("batch size must be positive");
  const std::size_t larger = std::max(clean_pool, noisy_pool);
  return std::max<std::size_t>(1, (larger + batch - 1) / batch);
}

Trainer::Trainer(const TrainConfig& config, std::vector<std::string> labels, std::size_t feature_rows)
    : config_(config), labels_(std::move(labels)), feature_rows_(feature_rows) {
  config_.validate();
  if (labels_.empty() || labels_[0] != "clean") throw InputError("label list must start with 'clean'");
  label_rows_ = config_.mode == Mode::kNit ? labels_.size() : 0;
  const std::size_t rows = feature_rows_ + label_rows_;
  std::mt19937_64 rng(config_.seed);
  const models::GeneratorSpec gs{rows, config_.base_channels, config_.residual_blocks,
                                 config_.downsample_factor};
  const models::DiscriminatorSpec ds{rows, config_.d_base_channels, config_.d_layers};
  g_ys_ = std::make_unique<models::Generator>(gs, rng);
  g_sy_ = std::make_unique<models::Generator>(gs, rng);
  d_s_ = std::make_unique<models::Discriminator>(ds, rng);
  d_y_ = std::make_unique<models::Discriminator>(ds, rng);
  adam_g_ys_ = ad::AdamState::for_parameters(g_ys_->parameters(), config_.beta1, config_.beta2);
  adam_g_sy_ = ad::AdamState::for_parameters(g_sy_->parameters(), config_.beta1, config_.beta2);
  adam_d_s_ = ad::AdamState::for_parameters(d_s_->parameters(), config_.beta1, config_.beta2);
  adam_d_y_ = ad::AdamState::for_parameters(d_y_->parameters(), config_.beta1, config_.beta2);
}

double Trainer::identity_weight(std::uint64_t epoch) const {
  if (config_.idm_decay_epochs > 0 && epoch > config_.idm_decay_epochs) return 0.0;
  return config_.weights.lambda_idm;
}

losses::LossReport Trainer::step(const data::UnpairedBatch& b) {
  const auto& shape = b.s.shape();
  if (shape.size() != 3 || shape[1] != feature_rows_ || b.y.shape() != shape) {
    throw ShapeError("train step: batches must be [B, " + std::to_string(feature_rows_) + ", T] and equal");
  }
  const std::size_t n_noise = labels_.size() - 1;
  const std::size_t batch = shape[0];
  const std::uint64_t step_no = global_step_ + 1;

  Tensor s_tn = b.s, s_tc = b.s, y_tc = b.y, y_tn = b.y, clean_rows, noise_rows;
  if (label_rows_ > 0) {
    if (b.s_target.size() != batch || b.y_label.size() != batch) {
      throw ShapeError("train step: one label per batch item required");
    }
    const std::vector<std::size_t> clean_idx(batch, cond::kCleanIndex);
    s_tn = with_labels(b.s, b.s_target, n_noise);
    s_tc = with_labels(b.s, clean_idx, n_noise);
    y_tc = with_labels(b.y, clean_idx, n_noise);
    y_tn = with_labels(b.y, b.y_label, n_noise);
    clean_rows = cond::label_rows(s_tc, label_rows_);
    noise_rows = cond::label_rows(y_tn, label_rows_);
    for (const Tensor* t : {&s_tn, &s_tc, &y_tc, &y_tn}) cond::validate_label_batch(*t, label_rows_);
  }

  const losses::Mapping gys = [this](const Tensor& x) { return g_ys_->forward(x); };
  const losses::Mapping gsy = [this](const Tensor& x) { return g_sy_->forward(x); };
  const auto& adv = config_.adversarial;
  const double w_idm = identity_weight(epoch_);
  const std::size_t skip = config_.mask_label_rows ? label_rows_ : 0;

  losses::LossTerms terms;
  const losses::CyclePass pass = losses::cycle_pass(gys, gsy, s_tn, y_tc, clean_rows, noise_rows);

  // D-phase: generator outputs enter detached.
  d_s_->zero_grad();
  d_y_->zero_grad();
  const Tensor real_s = d_s_->forward(s_tc);
  const Tensor real_y = d_y_->forward(y_tn);
  const Tensor adv1_s = losses::discriminator_loss_from_scores(real_s, d_s_->forward(pass.fake_s.detach()), adv);
  const Tensor adv2_s = losses::discriminator_loss_from_scores(real_s, d_s_->forward(pass.cyc_s.detach()), adv);
  const Tensor adv1_y = losses::discriminator_loss_from_scores(real_y, d_y_->forward(pass.fake_y.detach()), adv);
  const Tensor adv2_y = losses::discriminator_loss_from_scores(real_y, d_y_->forward(pass.cyc_y.detach()), adv);
  terms.adv1_s = adv1_s.at(0);
  terms.adv2_s = adv2_s.at(0);
  terms.adv1_y = adv1_y.at(0);
  terms.adv2_y = adv2_y.at(0);
  check_finite(losses::compose_objectives(config_.weights, terms), "discriminator phase", step_no);
  ad::sum(ad::concat({adv1_s, adv2_s, adv1_y, adv2_y}, 0)).backward();
  ad::adam_step(d_s_->parameters(), adam_d_s_, config_.lr_d);
  ad::adam_step(d_y_->parameters(), adam_d_y_, config_.lr_d);
  if (phase_hook_) phase_hook_("d");

  // G-phase through the updated, frozen discriminators.
  g_ys_->zero_grad();
  g_sy_->zero_grad();
  Tensor gen_s, gen_y;
  {
    ad::FreezeGuard fs(*d_s_), fy(*d_y_);
    gen_s = losses::generator_loss_from_scores(d_s_->forward(pass.fake_s), adv);
    gen_y = losses::generator_loss_from_scores(d_y_->forward(pass.fake_y), adv);
  }
  const Tensor cyc = losses::cycle_loss_from(pass, s_tc, y_tn, skip);
  std::vector<Tensor> parts{gen_s, gen_y, ad::scale(cyc, static_cast<float>(config_.weights.lambda_cyc))};
  if (w_idm > 0.0) {
    const Tensor idm = losses::identity_loss(gys, gsy, s_tc, y_tn, skip);
    terms.idm = idm.at(0);
    parts.push_back(ad::scale(idm, static_cast<float>(w_idm)));
  }
  terms.adv1_gen_s = gen_s.at(0);
  terms.adv1_gen_y = gen_y.at(0);
  terms.cyc = cyc.at(0);
  losses::LossWeights w = config_.weights;
  w.lambda_idm = w_idm;
  const losses::LossReport report = losses::compose_objectives(w, terms);
  check_finite(report, "generator phase", step_no);
  ad::sum(ad::concat(parts, 0)).backward();
  ad::adam_step(g_ys_->parameters(), adam_g_ys_, config_.lr_g);
  ad::adam_step(g_sy_->parameters(), adam_g_sy_, config_.lr_g);
  global_step_ = step_no;
  if (phase_hook_) phase_hook_("g");
  return report;
}

models::Checkpoint Trainer::checkpoint(std::uint64_t epoch, const dsp::StftConfig& stft,
                                       const dsp::FeatureConfig& features,
                                       const dsp::FeatureNorm& norm) const {
  models::Checkpoint c;
  c.mode = to_string(config_.mode);
  c.generator = g_ys_->spec();
  c.discriminator = d_s_->spec();
  c.label_names = labels_;
  c.stft = stft;
  c.features = features;
  c.norm = norm;
  c.epoch = epoch;
  c.global_step = global_step_;
  c.train_config = config_.to_json();
  const ad::ParameterSet* sets[] = {g_ys_.get(), g_sy_.get(), d_s_.get(), d_y_.get()};
  const ad::AdamState* states[] = {&adam_g_ys_, &adam_g_sy_, &adam_d_s_, &adam_d_y_};
  for (int i = 0; i < 4; ++i) {
    models::export_parameters(*sets[i], kPrefixes[i], c);
    models::export_adam(*states[i], *sets[i], kPrefixes[i], c);
  }
  return c;
}

void Trainer::restore(const models::Checkpoint& c) {
  if (c.mode != to_string(config_.mode)) {
    throw InputError("checkpoint was trained in " + c.mode + " mode, run is " + to_string(config_.mode));
  }
  if (c.label_names != labels_) throw InputError("checkpoint label list differs from the manifest");
  if (c.generator != g_ys_->spec() || c.discriminator != d_s_->spec()) {
    throw InputError("checkpoint model shapes differ from the configuration");
  }
  ad::ParameterSet* sets[] = {g_ys_.get(), g_sy_.get(), d_s_.get(), d_y_.get()};
  ad::AdamState* states[] = {&adam_g_ys_, &adam_g_sy_, &adam_d_s_, &adam_d_y_};
  for (int i = 0; i < 4; ++i) {
    models::import_parameters(c, kPrefixes[i], *sets[i]);
    *states[i] = models::import_adam(c, *sets[i], kPrefixes[i]);
  }
  global_step_ = c.global_step;
  epoch_ = c.epoch + 1;
}

namespace {

// Keeps the header and rows with step <= last_step.
void truncate_csv(const fs::path& path, std::uint64_t last_step) {
  std::vector<std::string> keep{losses::LossReport::csv_header()};
  std::ifstream in(path);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      continue;
    }
    if (line.empty()) continue;
    const std::uint64_t step = std::stoull(line.substr(0, line.find(',')));
    if (step <= last_step) keep.push_back(line);
  }
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

std::string epoch_name(std::uint64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_epoch_%04" PRIu64 ".bin", epoch);
  return buf;
}

}  // namespace

TrainResult train(const TrainConfig& config, const data::CorpusManifest& manifest,
                  const fs::path& manifest_root, const TrainOptions& options) {
  config.validate();
  const auto report = data::validate_manifest(manifest, manifest_root);
  if (!report.pass()) {
    std::string msg = "manifest failed validation (" + std::to_string(report.issues.size()) + " issue(s))";
    for (std::size_t i = 0; i < std::min<std::size_t>(report.issues.size(), 5); ++i) {
      const auto& is = report.issues[i];
      msg += "\n  " + (is.record_id.empty() ? std::string("<manifest>") : is.record_id) + ": " + is.message;
    }
    throw InputError(msg);
  }
  const auto store = data::FeatureStore::load(manifest, manifest_root);
  Trainer trainer(config, manifest.labels, store.feature_rows());
  const std::size_t spe = steps_per_epoch(store.clean().size(), store.noisy().size(), config.batch_size);
  std::uint64_t total = static_cast<std::uint64_t>(config.epochs) * spe;
  if (config.max_steps > 0) total = std::min<std::uint64_t>(total, config.max_steps);

  fs::create_directories(options.out_dir);
  const fs::path csv_path = options.out_dir / "losses.csv";
  std::uint64_t start = 0;
  if (options.resume) {
    const auto ckpt = models::load_checkpoint(*options.resume, trainer.label_rows());
    trainer.restore(ckpt);
    start = ckpt.global_step;
    truncate_csv(csv_path, start);
  } else {
    std::ofstream(csv_path, std::ios::trunc) << losses::LossReport::csv_header() << '\n';
  }

  json run = {{"train", config.to_json()},
              {"manifest",
               {{"labels", manifest.labels},
                {"split_mode", data::to_string(manifest.split_mode)},
                {"seed", manifest.seed},
                {"records", manifest.records.size()},
                {"clean_pool", store.clean().size()},
                {"noisy_pool", store.noisy().size()}}},
              {"steps_per_epoch", spe},
              {"total_steps", total},
              {"resumed_at_step", start}};
  std::ofstream(options.out_dir / "run_config.json", std::ios::trunc) << run.dump(2) << '\n';

  std::ofstream csv(csv_path, std::ios::app);
  if (!csv) throw InputError(csv_path.string() + ": cannot open for writing");
  TrainResult result;
  auto save = [&](const fs::path& path, std::uint64_t epoch) {
    models::save_checkpoint(trainer.checkpoint(epoch, manifest.stft, manifest.features, manifest.norm), path);
  };
  for (std::uint64_t step = start; step < total; ++step) {
    const std::uint64_t epoch = step / spe + 1;
    trainer.set_epoch(epoch);
    const auto batch = data::sample_unpaired_batch(store, config.batch_size, config.crop_frames, config.seed, step);
    const auto rep = trainer.step(batch);
    csv << rep.csv_row(step + 1, epoch) << '\n';
    csv.flush();
    result.history.push_back(rep);
    if (options.on_step) options.on_step(step + 1, epoch, rep);
    if ((step + 1) % spe == 0) {
      if (epoch % config.checkpoint_every == 0) save(options.out_dir / epoch_name(epoch), epoch);
      if (!options.quiet) {
        std::fprintf(stderr, "epoch %" PRIu64 " step %" PRIu64 " cyc %.5g d_s %.5g d_y %.5g\n", epoch, step + 1,
                     rep.terms.cyc, rep.d_s_total, rep.d_y_total);
      }
    }
  }
  result.steps = std::max(total, start);
  result.epochs = result.steps / spe;
  result.final_checkpoint = options.out_dir / "last.bin";
  save(result.final_checkpoint, result.epochs);
  return result;
}

Enhancer::Enhancer(const models::Checkpoint& checkpoint) : ckpt_(checkpoint) {
  std::mt19937_64 rng(0);
  g_ys_ = std::make_unique<models::Generator>(ckpt_.generator, rng);
  models::import_parameters(ckpt_, "g_ys", *g_ys_);
  if (ckpt_.norm.empty() || ckpt_.norm.mean.size() != ckpt_.stft.bins()) {
    throw FormatError("checkpoint lacks feature normalisation for " + std::to_string(ckpt_.stft.bins()) + " bins");
  }
  if (ckpt_.generator.in_rows != ckpt_.stft.bins() + ckpt_.label_dim()) {
    throw FormatError("checkpoint generator rows do not match bins + label rows");
  }
}

Matrix Enhancer::enhance_magnitude(const dsp::Spectrogram& noisy) const {
  const Matrix feats = dsp::to_features(noisy.magnitude, ckpt_.features, ckpt_.norm);
  const std::size_t frames = feats.cols;
  const std::size_t labels = ckpt_.label_dim();
  Tensor x = Tensor::from({1, feats.rows, frames}, feats.values);
  if (labels > 0) {
    x = with_labels(x, {cond::kCleanIndex}, labels - 1);
  }
  ad::NoGradGuard no_grad;
  const Tensor out = cond::feature_rows(g_ys_->forward(x), labels);
  Matrix m(feats.rows, frames);
  const auto v = out.data();
  m.values.assign(v.begin(), v.end());
  return dsp::from_features(m, ckpt_.features, ckpt_.norm);
}

dsp::Waveform Enhancer::run(const dsp::Waveform& noisy) const {
  if (noisy.sample_rate != ckpt_.stft.sample_rate) {
    throw InputError("sample rate " + std::to_string(noisy.sample_rate) + " Hz differs from the model's " +
                     std::to_string(ckpt_.stft.sample_rate) + " Hz");
  }
  if (noisy.samples.empty()) throw InputError("cannot enhance an empty signal");
  const auto spec = dsp::stft(noisy, ckpt_.stft);
  return dsp::reconstruct_with_noisy_phase(enhance_magnitude(spec), spec);
}

dsp::Waveform enhance(const models::Checkpoint& checkpoint, const dsp::Waveform& noisy) {
  return Enhancer(checkpoint).run(noisy);
}

}  // namespace nitcg::training
