#include "contradice/formulas.hpp"

namespace contradice {

namespace {

class PsiSignFlip final : public Formulas {
 public:
  double psi(double log_ratio_g, double log_ratio_b, double alpha) const override {
    return -(log_ratio_g - alpha * log_ratio_b);
  }
  std::string name() const override { return "psi_sign_flip"; }
};

class DropOneMinusAlpha final : public Formulas {
 public:
  double kl_scale(double) const override { return 1.0; }
  std::string name() const override { return "drop_one_minus_alpha"; }
};

class ExpToLinear final : public Formulas {
 public:
  double exp_link(double t) const override { return t; }
  std::string name() const override { return "exp_to_linear"; }
};

}  // namespace

const Formulas& standard_formulas() {
  static const Formulas kStandard;
  return kStandard;
}

std::vector<std::string> mutation_names() {
  return {"psi_sign_flip", "drop_one_minus_alpha", "exp_to_linear"};
}

const Formulas* find_mutation(const std::string& name) {
  static const PsiSignFlip kPsiSignFlip;
  static const DropOneMinusAlpha kDropOneMinusAlpha;
  static const ExpToLinear kExpToLinear;
  if (name == kPsiSignFlip.name()) return &kPsiSignFlip;
  if (name == kDropOneMinusAlpha.name()) return &kDropOneMinusAlpha;
  if (name == kExpToLinear.name()) return &kExpToLinear;
  return nullptr;
}

}  // namespace contradice
