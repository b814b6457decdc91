// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/losses.h"

#include <cmath>
#include <cstdio>

#include "nitcg/conditioning.h"
#include "nitcg/error.h"
#include "nitcg/ops.h"

namespace nitcg::losses {

namespace {

void require_batch(const ad::Tensor& t, const char* what) {
  if (!t.defined()) throw ShapeError(std::string(what) + ": empty batch");
}

ad::Tensor clamped(const ad::Tensor& scores, float eps) { return ad::clamp(scores, eps, 1.0f - eps); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void LossWeights::validate() const {
  if (!(lambda_cyc >= 0.0 && std::isfinite(lambda_cyc) && lambda_idm >= 0.0 && std::isfinite(lambda_idm))) {
    throw InputError("loss weights must be finite and nonnegative");
  }
}

ad::Tensor l1_mean(const ad::Tensor& a, const ad::Tensor& b, std::size_t skip_rows) {
  require_batch(a, "l1");
  require_batch(b, "l1");
  if (skip_rows == 0) return ad::mean(ad::abs(ad::sub(a, b)));
  return ad::mean(ad::abs(ad::sub(cond::feature_rows(a, skip_rows), cond::feature_rows(b, skip_rows))));
}

CyclePass cycle_pass(const Mapping& g_ys, const Mapping& g_sy, const ad::Tensor& s_in,
                     const ad::Tensor& y_in, const ad::Tensor& clean_rows, const ad::Tensor& noise_rows) {
  require_batch(s_in, "cycle");
  require_batch(y_in, "cycle");
  CyclePass p;
  p.fake_y = g_sy(s_in);
  p.cyc_s = g_ys(cond::replace_label_rows(p.fake_y, clean_rows));
  p.fake_s = g_ys(y_in);
  p.cyc_y = g_sy(cond::replace_label_rows(p.fake_s, noise_rows));
  return p;
}

ad::Tensor cycle_loss_from(const CyclePass& pass, const ad::Tensor& s_target, const ad::Tensor& y_target,
                           std::size_t skip_rows) {
  return ad::add(l1_mean(pass.cyc_s, s_target, skip_rows), l1_mean(pass.cyc_y, y_target, skip_rows));
}

ad::Tensor cycle_loss(const Mapping& g_ys, const Mapping& g_sy, const ad::Tensor& s, const ad::Tensor& y) {
  return cycle_loss_from(cycle_pass(g_ys, g_sy, s, y), s, y);
}

ad::Tensor nit_cycle_loss(const Mapping& g_ys, const Mapping& g_sy, const ad::Tensor& s_tc,
                          const ad::Tensor& s_tn, const ad::Tensor& y_tc, const ad::Tensor& y_tn,
                          std::size_t label_rows, bool mask_labels) {
  for (const auto* t : {&s_tc, &s_tn, &y_tc, &y_tn}) require_batch(*t, "nit_cycle");
  for (const auto* t : {&s_tc, &s_tn, &y_tc, &y_tn}) {
    if (t->rank() != 3 || t->dim(1) <= label_rows) {
      throw ShapeError("nit_cycle: batch " + ad::shape_str(t->shape()) + " cannot carry " +
                       std::to_string(label_rows) + " label rows");
    }
  }
  if (s_tc.shape() != s_tn.shape() || y_tc.shape() != y_tn.shape()) {
    throw ShapeError("nit_cycle: label dimension mismatch between clean/noise-labelled batches");
  }
  const ad::Tensor clean_rows = cond::label_rows(s_tc, label_rows);
  const ad::Tensor noise_rows = cond::label_rows(y_tn, label_rows);
  const CyclePass pass = cycle_pass(g_ys, g_sy, s_tn, y_tc, clean_rows, noise_rows);
  return cycle_loss_from(pass, s_tc, y_tn, mask_labels ? label_rows : 0);
}

ad::Tensor discriminator_loss_from_scores(const ad::Tensor& real_scores, const ad::Tensor& fake_scores,
                                          const AdversarialOptions& opt) {
  require_batch(real_scores, "adversarial");
  require_batch(fake_scores, "adversarial");
  if (opt.objective == GanObjective::kLeastSquares) {
    return ad::add(ad::mean(ad::square(ad::add_scalar(real_scores, -1.0f))),
                   ad::mean(ad::square(fake_scores)));
  }
  const ad::Tensor real_term = ad::mean(ad::log(clamped(real_scores, opt.eps)));
  const ad::Tensor fake_term =
      ad::mean(ad::log(ad::add_scalar(ad::scale(clamped(fake_scores, opt.eps), -1.0f), 1.0f)));
  return ad::scale(ad::add(real_term, fake_term), -1.0f);
}

ad::Tensor generator_loss_from_scores(const ad::Tensor& fake_scores, const AdversarialOptions& opt) {
  require_batch(fake_scores, "adversarial");
  if (opt.objective == GanObjective::kLeastSquares) {
    return ad::mean(ad::square(ad::add_scalar(fake_scores, -1.0f)));
  }
  const ad::Tensor d = clamped(fake_scores, opt.eps);
  if (opt.non_saturating) return ad::scale(ad::mean(ad::log(d)), -1.0f);
  return ad::mean(ad::log(ad::add_scalar(ad::scale(d, -1.0f), 1.0f)));
}

ad::Tensor adv1_discriminator_loss(const Critic& d, const ad::Tensor& real, const ad::Tensor& fake,
                                   const AdversarialOptions& opt) {
  require_batch(real, "adv1");
  require_batch(fake, "adv1");
  return discriminator_loss_from_scores(d.score(real), d.score(fake.detach()), opt);
}

ad::Tensor adv1_generator_loss(const Critic& d, const ad::Tensor& fake, const AdversarialOptions& opt) {
  require_batch(fake, "adv1");
  return generator_loss_from_scores(d.frozen(fake), opt);
}

ad::Tensor adv2_discriminator_loss(const Critic& d, const ad::Tensor& real, const ad::Tensor& cycled_fake,
                                   const AdversarialOptions& opt) {
  require_batch(real, "adv2");
  require_batch(cycled_fake, "adv2");
  return discriminator_loss_from_scores(d.score(real), d.score(cycled_fake.detach()), opt);
}

ad::Tensor identity_loss(const Mapping& g_ys, const Mapping& g_sy, const ad::Tensor& s, const ad::Tensor& y,
                         std::size_t skip_rows) {
  require_batch(s, "identity");
  require_batch(y, "identity");
  return ad::add(l1_mean(g_ys(s), s, skip_rows), l1_mean(g_sy(y), y, skip_rows));
}

bool LossReport::finite() const {
  for (double v : {terms.cyc, terms.adv1_s, terms.adv1_y, terms.adv1_gen_s, terms.adv1_gen_y, terms.adv2_s,
                   terms.adv2_y, terms.idm, g_ys_total, g_sy_total, d_s_total, d_y_total}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string LossReport::csv_header() {
  return "step,epoch,cyc,adv1_s,adv1_y,adv1_gen_s,adv1_gen_y,adv2_s,adv2_y,idm,"
         "g_ys_total,g_sy_total,d_s_total,d_y_total";
}

std::string LossReport::csv_row(std::uint64_t step, std::uint64_t epoch) const {
  std::string row = std::to_string(step) + "," + std::to_string(epoch);
  for (double v : {terms.cyc, terms.adv1_s, terms.adv1_y, terms.adv1_gen_s, terms.adv1_gen_y, terms.adv2_s,
                   terms.adv2_y, terms.idm, g_ys_total, g_sy_total, d_s_total, d_y_total}) {
    row += "," + fmt(v);
  }
  return row;
}

LossReport compose_objectives(const LossWeights& w, const LossTerms& terms) {
  LossReport r;
  r.terms = terms;
  const double shared = w.lambda_cyc * terms.cyc + w.lambda_idm * terms.idm;
  r.g_ys_total = terms.adv1_gen_s + shared;
  r.g_sy_total = terms.adv1_gen_y + shared;
  r.d_s_total = terms.adv1_s + terms.adv2_s;
  r.d_y_total = terms.adv1_y + terms.adv2_y;
  return r;
}

}  // namespace nitcg::losses
