#include "jumpflow/controllability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jumpflow/errors.hpp"

namespace jumpflow {

RankCertificate kalman_rank(const Matrix& a, const Matrix& b) {
  require(a.rows() == a.cols(), "kalman_rank: A must be square");
  require(b.rows() == a.rows(), "kalman_rank: B must have d rows");
  const Eigen::Index d = a.rows(), n = b.cols();
  Matrix k(d, d * n);
  Matrix block = b;
  for (Eigen::Index i = 0; i < d; ++i) {
    k.middleCols(i * n, n) = block;
    block = a * block;
  }
  const Eigen::JacobiSVD<Matrix> svd(k);
  const Vector sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  RankCertificate c;
  c.kind = "kalman";
  c.target_dim = static_cast<int>(d);
  c.tolerance = double(d) * smax * std::numeric_limits<double>::epsilon() * 1e3;
  c.singular_values.assign(sv.data(), sv.data() + sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > c.tolerance && smax > 0.0) ++c.dimension_reached;
  c.generations_used = static_cast<int>(d);
  c.pass = c.dimension_reached == c.target_dim;
  return c;
}

Vector lie_bracket(const VectorField& u, const VectorField& v, const Vector& x) {
  require(u.dim() == v.dim() && x.size() == u.dim(), "lie_bracket: dimension mismatch");
  return jacobian(v, x) * u(x) - jacobian(u, x) * v(x);
}

namespace {

// First slot index not used by any component of x.
unsigned free_slot(std::span<const Jet> x) {
  unsigned s = 0;
  for (const auto& v : x) s = std::max(s, v.slots());
  return s;
}

// D G(x)[H] for jet-valued x: evaluate G at x + eps_s H with a fresh slot s.
void directional(const VectorField& g, std::span<const Jet> x, std::span<const Jet> h, unsigned slot,
                 std::span<Jet> out) {
  std::vector<Jet> shifted(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Jet dir = h[i];
    Jet eps = Jet::seed(0.0, slot);
    shifted[i] = x[i] + eps * dir;
  }
  g.eval_jet(shifted, out);
  for (auto& v : out) v = v.derivative_part(slot);
}

}  // namespace

VectorField lie_bracket_field(const VectorField& u, const VectorField& v) {
  require(u.dim() == v.dim(), "lie_bracket_field: dimension mismatch");
  require(u.has_jet() && v.has_jet(), "lie_bracket_field needs jet-capable fields");
  std::optional<int> deg;
  if (u.degree() && v.degree()) deg = std::max(-1, *u.degree() + *v.degree() - 1);
  const bool u_const = u.is_constant(), v_const = v.is_constant();
  auto jet_eval = [u, v, u_const, v_const](std::span<const Jet> x, std::span<Jet> out) {
    const std::size_t d = x.size();
    const unsigned slot = free_slot(x);
    std::vector<Jet> ux(d), vx(d), tmp(d);
    for (auto& o : out) o = Jet(0.0);
    if (!v_const) {
      u.eval_jet(x, ux);
      directional(v, x, ux, slot, out);
    }
    if (!u_const) {
      v.eval_jet(x, vx);
      directional(u, x, vx, slot, tmp);
      for (std::size_t i = 0; i < d; ++i) out[i] -= tmp[i];
    }
  };
  return VectorField(
      u.dim(),
      [jet_eval](std::span<const double> x, std::span<double> out) {
        std::vector<Jet> xj(x.begin(), x.end()), oj(out.size());
        jet_eval(xj, oj);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = oj[i].value();
      },
      jet_eval, {}, deg);
}

namespace {

struct Word {
  VectorField field;
  int last_constant = -1;  // index of the outermost letter if it is a column of B, else -1
};

}  // namespace

RankCertificate hormander_tower(const VectorField& f, const Matrix& b, const Vector& x_hat, const TowerOptions& opts) {
  require(opts.max_generations >= 1, "hormander_tower needs max_generations >= 1");
  require(b.rows() == f.dim() && x_hat.size() == f.dim(), "hormander_tower: dimension mismatch");
  require(f.has_jet(), "hormander_tower needs a jet-capable drift");
  const Eigen::Index d = f.dim();
  RankCertificate c;
  c.kind = "hormander";
  c.point = x_hat;
  c.target_dim = static_cast<int>(d);
  c.tolerance = opts.tol;

  std::vector<VectorField> letters;
  for (Eigen::Index j = 0; j < b.cols(); ++j) letters.push_back(VectorField::constant(b.col(j)));

  Matrix basis(d, 0);
  double scale = 0.0;
  Matrix const_span(d, 0);  // values of kept constant words, orthonormalized
  auto absorb = [&](std::vector<Vector> candidates) {
    for (const auto& v : candidates) scale = std::max(scale, v.norm());
    Matrix m(d, basis.cols() + Eigen::Index(candidates.size()));
    m.leftCols(basis.cols()) = basis;
    Eigen::Index used = basis.cols();
    for (const auto& v : candidates)
      if (v.norm() > opts.zero_tol * scale) m.col(used++) = v.normalized();
    if (used == 0) return;
    const Eigen::JacobiSVD<Matrix> svd(m.leftCols(used), Eigen::ComputeThinU);
    const Vector sv = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv[rank] > opts.tol * sv[0]) ++rank;
    basis = svd.matrixU().leftCols(rank);
    c.singular_values.assign(sv.data(), sv.data() + sv.size());
  };
  // A constant word adds nothing new to later generations when its value is
  // already spanned by earlier constant words: brackets act linearly on it.
  auto constant_is_new = [&](const Vector& v) {
    if (v.norm() <= opts.zero_tol * std::max(scale, 1e-300)) return false;
    Vector r = v.normalized();
    if (const_span.cols() > 0) r -= const_span * (const_span.transpose() * r);
    if (r.norm() <= 1e-8) return false;
    const_span.conservativeResize(d, const_span.cols() + 1);
    const_span.col(const_span.cols() - 1) = r.normalized();
    return true;
  };

  std::vector<Word> words;
  {
    std::vector<Vector> cand;
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      cand.push_back(b.col(j));
      scale = std::max(scale, b.col(j).norm());
    }
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      if (constant_is_new(b.col(j))) words.push_back({letters[std::size_t(j)], int(j)});
    absorb(cand);
  }
  c.dims_per_generation.push_back(static_cast<int>(basis.cols()));

  for (int gen = 1; gen <= opts.max_generations && basis.cols() < d && !words.empty(); ++gen) {
    std::vector<Word> next;
    std::vector<Vector> cand;
    auto consider = [&](VectorField field, int last_constant) {
      if (field.degree() && *field.degree() < 0) return;
      if (next.size() >= opts.max_words) return;
      const Vector v = field(x_hat);
      cand.push_back(v);
      if (field.is_constant() && !constant_is_new(v)) return;
      next.push_back({std::move(field), last_constant});
    };
    for (const auto& w : words) {
      // Constant letters commute when applied in a row; keep them nondecreasing.
      for (std::size_t j = 0; j < letters.size(); ++j) {
        if (w.last_constant >= 0 && int(j) < w.last_constant) continue;
        if (w.field.is_constant()) continue;  // [c, constant] = 0
        consider(lie_bracket_field(letters[j], w.field), int(j));
      }
      consider(lie_bracket_field(f, w.field), -1);
    }
    absorb(cand);
    c.dims_per_generation.push_back(static_cast<int>(basis.cols()));
    c.generations_used = gen;
    words = std::move(next);
  }
  c.dimension_reached = static_cast<int>(basis.cols());
  c.pass = c.dimension_reached == c.target_dim;
  return c;
}

RankCertificate solid_cert(const SystemSpec& spec, const Vector& x_hat, std::span<const double> s_hat, int probes,
                           Rng& rng, double rel_tol) {
  spec.validate();
  const int m = static_cast<int>(s_hat.size());
  require(m >= 1, "solid_cert needs m >= 1 waiting times");
  require(m * spec.n() >= spec.d(), "solid_cert needs m n >= d");
  require(probes >= 1, "solid_cert needs at least one probe");
  require(x_hat.size() == spec.d(), "solid_cert: x_hat has wrong dimension");
  RankCertificate c;
  c.kind = "solid";
  c.point = x_hat;
  c.target_dim = spec.d();
  c.tolerance = rel_tol;
  c.generations_used = m;
  double best_ratio = -1.0;
  for (int p = 0; p < probes; ++p) {
    std::vector<Vector> xi;
    for (int i = 0; i < m; ++i) xi.push_back(spec.law.sample(rng));
    const Eigen::JacobiSVD<Matrix> svd(block_jacobian(spec, x_hat, s_hat, xi));
    const Vector sv = svd.singularValues();
    int rank = 0;
    while (rank < sv.size() && sv[0] > 0.0 && sv[rank] > rel_tol * sv[0]) ++rank;
    const double ratio = rank > 0 ? sv[std::min<Eigen::Index>(spec.d(), sv.size()) - 1] / sv[0] : 0.0;
    ++c.probes;
    if (rank > c.dimension_reached || (rank == c.dimension_reached && ratio > best_ratio)) {
      c.dimension_reached = std::min(rank, spec.d());
      best_ratio = ratio;
      c.singular_values.assign(sv.data(), sv.data() + sv.size());
      Eigen::Index len = 0;
      for (const auto& v : xi) len += v.size();
      c.best_probe.resize(len);
      Eigen::Index at = 0;
      for (const auto& v : xi) {
        c.best_probe.segment(at, v.size()) = v;
        at += v.size();
      }
    }
  }
  c.pass = c.dimension_reached == c.target_dim;
  c.conclusive = c.pass;
  return c;
}

}  // namespace jumpflow
