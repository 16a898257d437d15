#include "gtc/contrastive.hpp"

#include <cmath>

#include "gtc/error.hpp"

namespace gtc::contrast {

void ContrastConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0, got " + std::to_string(tau));
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1], got " + std::to_string(lambda));
  if (theta_pos < 1) throw ConfigError("theta_pos must be >= 1, got " + std::to_string(theta_pos));
  if (head && head_dim == 0) throw ConfigError("contrast head dim must be positive");
}

ContrastHead ContrastHead::init(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  return ContrastHead{true, Affine::init(in_dim, out_dim, rng), Affine::init(out_dim, out_dim, rng)};
}

void ContrastHead::visit(const std::string& prefix, const ParamVisitor& fn) {
  if (!enabled) return;
  hidden.visit(prefix + ".hidden", fn);
  output.visit(prefix + ".output", fn);
}

ad::Var project_to_contrast_space(ad::Tape& tape, const ad::Var& z, const ContrastHead& head) {
  if (!head.enabled) return z;
  if (z.cols() != head.hidden.in_dim()) {
    throw ShapeError("project_to_contrast_space: input width " + std::to_string(z.cols()) + " but head expects " +
                     std::to_string(head.hidden.in_dim()));
  }
  return apply(tape, head.output, ad::elu(apply(tape, head.hidden, z)));
}

void check_contrast_dims(std::size_t schema_dim, std::size_t hops_dim, const ContrastHead& schema_head,
                         const ContrastHead& hops_head) {
  const std::size_t a = schema_head.enabled ? schema_head.output.out_dim() : schema_dim;
  const std::size_t b = hops_head.enabled ? hops_head.output.out_dim() : hops_dim;
  if (a != b) {
    throw ConfigError("contrast views have widths " + std::to_string(a) + " and " + std::to_string(b) +
                      "; enable the projection head or use equal dims");
  }
}

namespace {

void check_rows(const Tensor& z, const char* view) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double s = 0.0;
    for (double v : z.row(i)) s += v * v;
    if (!(s > 0.0)) {
      throw NumericError(std::string("contrastive_loss: ") + view + " embedding of node " + std::to_string(i) +
                         " has zero norm; cosine similarity is undefined");
    }
  }
}

}  // namespace

LossTerms contrastive_loss(const ad::Var& z_sv, const ad::Var& z_hv, const ContrastiveSets& sets, double tau, double lambda) {
  if (!(tau > 0.0)) throw ConfigError("contrastive_loss: tau must be > 0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("contrastive_loss: lambda must lie in [0, 1]");
  if (z_sv.shape() != z_hv.shape() || z_sv.value().rank() != 2) {
    throw ShapeError("contrastive_loss: views have shapes " + shape_str(z_sv.shape()) + " and " + shape_str(z_hv.shape()));
  }
  if (z_sv.rows() != sets.size()) {
    throw ShapeError("contrastive_loss: " + std::to_string(z_sv.rows()) + " embeddings for " + std::to_string(sets.size()) +
                     " nodes");
  }
  check_rows(z_sv.value(), "schema-view");
  check_rows(z_hv.value(), "hops-view");

  std::size_t degenerate = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) degenerate += sets.negative_count(i) == 0;

  const ad::Var a = ad::l2_normalize_rows(z_sv);
  const ad::Var b = ad::l2_normalize_rows(z_hv);
  const ad::Var sim = ad::scale(ad::matmul_nt(a, b), 1.0 / tau);
  const ad::Var sim_t = ad::transpose(sim);
  const auto mask = sets.shared_positive_mask();

  const ad::Var l_sv = ad::mean(ad::sub(ad::row_logsumexp(sim), ad::masked_row_logsumexp(sim, mask)));
  const ad::Var l_hv = ad::mean(ad::sub(ad::row_logsumexp(sim_t), ad::masked_row_logsumexp(sim_t, mask)));
  const ad::Var total = ad::add(ad::scale(l_sv, lambda), ad::scale(l_hv, 1.0 - lambda));
  return {total, l_sv, l_hv, degenerate};
}

}  // namespace gtc::contrast
