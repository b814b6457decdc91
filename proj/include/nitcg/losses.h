// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_LOSSES_H_
#define NITCG_LOSSES_H_

#include <cstdint>
#include <functional>
#include <string>

#include "nitcg/tensor.h"

// CycleGAN losses over [B, R, T] batches. The NIT variants operate on
// extended features whose first `label_rows` rows carry the domain label;
// with label_rows = 0 they reduce to the baseline forms.
//
// All expectations are arithmetic means over batch items and elements.
namespace nitcg::losses {

// A generator as seen by the losses: extended batch -> extended batch.
using Mapping = std::function<ad::Tensor(const ad::Tensor&)>;

// A discriminator returning probabilities. `frozen` evaluates with its
// parameters held constant (gradients still reach the input).
struct Critic {
  Mapping score;
  Mapping frozen;

  static Critic stateless(Mapping f) { return {f, f}; }
};

enum class GanObjective { kLog, kLeastSquares };

struct AdversarialOptions {
  GanObjective objective = GanObjective::kLog;
  // Generator minimises -E log D(fake); false gives the literal minimax
  // form +E log(1 - D(fake)).
  bool non_saturating = true;
  float eps = 1e-7f;
  bool operator==(const AdversarialOptions&) const = default;
};

struct LossWeights {
  double lambda_cyc = 10.0;
  double lambda_idm = 5.0;
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

// Mean |a - b| over rows >= skip_rows (all rows when skip_rows = 0).
ad::Tensor l1_mean(const ad::Tensor& a, const ad::Tensor& b, std::size_t skip_rows = 0);

// Forward products of one cycle in both directions.
struct CyclePass {
  ad::Tensor fake_y;  // G_sy(s_in)
  ad::Tensor cyc_s;   // G_ys(fake_y with clean label)
  ad::Tensor fake_s;  // G_ys(y_in)
  ad::Tensor cyc_y;   // G_sy(fake_s with noise label)
};

// s_in = s_tn, y_in = y_tc. Between the two generator calls the predicted
// label rows are replaced with `clean_rows` (s path) / `noise_rows` (y path);
// undefined row tensors skip the swap.
CyclePass cycle_pass(const Mapping& g_ys, const Mapping& g_sy, const ad::Tensor& s_in,
                     const ad::Tensor& y_in, const ad::Tensor& clean_rows = {},
                     const ad::Tensor& noise_rows = {});

// E|G_ys(G_sy(s)) - s| + E|G_sy(G_ys(y)) - y|.
ad::Tensor cycle_loss(const Mapping& g_ys, const Mapping& g_sy, const ad::Tensor& s,
                      const ad::Tensor& y);

// E|G_ys(G_sy(s_tn))' - s_tc| + E|G_sy(G_ys(y_tc))' - y_tn| with the label
// swaps applied. `mask_labels` excludes label rows from the L1.
ad::Tensor nit_cycle_loss(const Mapping& g_ys, const Mapping& g_sy, const ad::Tensor& s_tc,
                          const ad::Tensor& s_tn, const ad::Tensor& y_tc, const ad::Tensor& y_tn,
                          std::size_t label_rows, bool mask_labels = false);

// Cycle L1 from a precomputed pass.
ad::Tensor cycle_loss_from(const CyclePass& pass, const ad::Tensor& s_target,
                           const ad::Tensor& y_target, std::size_t skip_rows = 0);

// Discriminator side of the first adversarial loss (minimised):
// -(E log D(real) + E log(1 - D(fake))). `fake` is detached.
ad::Tensor adv1_discriminator_loss(const Critic& d, const ad::Tensor& real, const ad::Tensor& fake,
                                   const AdversarialOptions& opt = {});
// Generator side, evaluated through the frozen critic.
ad::Tensor adv1_generator_loss(const Critic& d, const ad::Tensor& fake,
                               const AdversarialOptions& opt = {});
// Second adversarial loss on cycled fakes; updates discriminators only.
ad::Tensor adv2_discriminator_loss(const Critic& d, const ad::Tensor& real,
                                   const ad::Tensor& cycled_fake, const AdversarialOptions& opt = {});

// Same functional forms on precomputed score maps.
ad::Tensor discriminator_loss_from_scores(const ad::Tensor& real_scores, const ad::Tensor& fake_scores,
                                          const AdversarialOptions& opt = {});
ad::Tensor generator_loss_from_scores(const ad::Tensor& fake_scores, const AdversarialOptions& opt = {});

// E|G_ys(s) - s| + E|G_sy(y) - y|; in NIT mode pass s_tc and y_tn.
ad::Tensor identity_loss(const Mapping& g_ys, const Mapping& g_sy, const ad::Tensor& s,
                         const ad::Tensor& y, std::size_t skip_rows = 0);

struct LossTerms {
  double cyc = 0;
  double adv1_s = 0;      // D^S discriminator loss
  double adv1_y = 0;      // D^Y discriminator loss
  double adv1_gen_s = 0;  // G_ys generator adversarial term
  double adv1_gen_y = 0;  // G_sy generator adversarial term
  double adv2_s = 0;
  double adv2_y = 0;
  double idm = 0;
};

struct LossReport {
  LossTerms terms;
  double g_ys_total = 0;
  double g_sy_total = 0;
  double d_s_total = 0;
  double d_y_total = 0;

  bool finite() const;
  static std::string csv_header();
  // "step,epoch,..." with every value printed to round-trip precision.
  std::string csv_row(std::uint64_t step, std::uint64_t epoch) const;
};

// G totals = adv1_gen + lambda_cyc * cyc + lambda_idm * idm;
// D totals = adv1 + adv2.
LossReport compose_objectives(const LossWeights& w, const LossTerms& terms);

}  // namespace nitcg::losses

#endif  // NITCG_LOSSES_H_
