#include "mscale/convex.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <variant>

namespace mscale {

namespace {

constexpr double kMembershipTol = 1e-10;  // indicator residual tolerance
constexpr double kSplitTol = 1e-10;       // inner splitting residual target
constexpr int kSplitMaxIter = 10000;

Mat pseudo_inverse(const Mat& A) {
  return A.completeOrthogonalDecomposition().pseudoInverse();
}

// least-squares solve min |Ax - b|, returns min-norm x
Vec lsq_min_norm(const Mat& A, const Vec& b) {
  return A.completeOrthogonalDecomposition().solve(b);
}

bool in_range_of_transpose(const Mat& A, const Vec& y, double tol_scale = 1e-9) {
  const Vec mu = lsq_min_norm(Mat(A.transpose()), y);
  const double res = (A.transpose() * mu - y).norm();
  return res <= tol_scale * (1.0 + y.norm());
}

Vec clamp(const Vec& x, const Vec& lo, const Vec& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

// ---------------------------------------------------------------------------
// ArgminSet

ArgminSet ArgminSet::affine(Mat A, Vec b) {
  require(A.rows() == b.size(), "affine set: A rows must match b length");
  require(A.cols() > 0, "affine set: empty domain");
  ArgminSet s;
  s.kind_ = Kind::Affine;
  s.dim_ = A.cols();
  s.x0_ = lsq_min_norm(A, b);
  require((A * s.x0_ - b).norm() <= 1e-9 * (1.0 + b.norm()), "affine set: Ax = b is infeasible (empty set)");
  s.A_ = std::move(A);
  s.b_ = std::move(b);
  return s;
}

ArgminSet ArgminSet::box(Vec lo, Vec hi) {
  require(lo.size() == hi.size(), "box: lo/hi length mismatch");
  require(lo.size() > 0, "box: empty domain");
  require((lo.array() <= hi.array()).all(), "box: requires lo <= hi");
  ArgminSet s;
  s.kind_ = Kind::Box;
  s.dim_ = lo.size();
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  return s;
}

ArgminSet ArgminSet::singleton(Vec z) {
  require(z.size() > 0, "singleton: empty domain");
  ArgminSet s;
  s.kind_ = Kind::Singleton;
  s.dim_ = z.size();
  s.z_ = std::move(z);
  return s;
}

ArgminSet ArgminSet::whole_space(Eigen::Index dim) {
  require(dim > 0, "whole space: dimension must be positive");
  ArgminSet s;
  s.kind_ = Kind::WholeSpace;
  s.dim_ = dim;
  return s;
}

Vec ArgminSet::project(const Vec& x) const {
  require(x.size() == dim_, "project: dimension mismatch");
  switch (kind_) {
    case Kind::Affine:
      return x - A_.completeOrthogonalDecomposition().solve(Vec(A_ * x - b_)).eval();
    case Kind::Box:
      return clamp(x, lo_, hi_);
    case Kind::Singleton:
      return z_;
    case Kind::WholeSpace:
      return x;
  }
  return x;
}

bool ArgminSet::contains(const Vec& x, double tol) const {
  require(x.size() == dim_, "contains: dimension mismatch");
  switch (kind_) {
    case Kind::Affine:
      return (A_ * x - b_).lpNorm<Eigen::Infinity>() <= tol;
    case Kind::Box:
      return (x.array() >= lo_.array() - tol).all() && (x.array() <= hi_.array() + tol).all();
    case Kind::Singleton:
      return (x - z_).lpNorm<Eigen::Infinity>() <= tol;
    case Kind::WholeSpace:
      return true;
  }
  return false;
}

double ArgminSet::support(const Vec& y) const {
  require(y.size() == dim_, "support: dimension mismatch");
  switch (kind_) {
    case Kind::Affine: {
      if (!in_range_of_transpose(A_, y)) return kInf;
      const Vec mu = lsq_min_norm(Mat(A_.transpose()), y);
      return mu.dot(b_);
    }
    case Kind::Box: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < dim_; ++i) {
        if (y[i] > 0.0)
          s += y[i] * hi_[i];
        else if (y[i] < 0.0)
          s += y[i] * lo_[i];
      }
      return s;
    }
    case Kind::Singleton:
      return y.dot(z_);
    case Kind::WholeSpace:
      return y.lpNorm<Eigen::Infinity>() <= kMembershipTol ? 0.0 : kInf;
  }
  return kInf;
}

bool ArgminSet::normal_cone_contains(const Vec& z, const Vec& p) const {
  require(z.size() == dim_ && p.size() == dim_, "normal cone: dimension mismatch");
  const double ptol = 1e-9 * (1.0 + p.lpNorm<Eigen::Infinity>());
  switch (kind_) {
    case Kind::Affine:
      return in_range_of_transpose(A_, p);
    case Kind::Box: {
      for (Eigen::Index i = 0; i < dim_; ++i) {
        const bool at_lo = z[i] <= lo_[i] + kMembershipTol;
        const bool at_hi = z[i] >= hi_[i] - kMembershipTol;
        if (at_lo && at_hi) continue;          // pinned coordinate, any p[i]
        if (at_hi && p[i] >= -ptol) continue;  // outward = positive at upper face
        if (at_lo && p[i] <= ptol) continue;
        if (!at_lo && !at_hi && std::abs(p[i]) <= ptol) continue;
        return false;
      }
      return true;
    }
    case Kind::Singleton:
      return true;
    case Kind::WholeSpace:
      return p.lpNorm<Eigen::Infinity>() <= ptol;
  }
  return false;
}

ArgminSet ArgminSet::translated(const Vec& shift) const {
  require(shift.size() == dim_, "translate: dimension mismatch");
  switch (kind_) {
    case Kind::Affine:
      return affine(A_, Vec(b_ + A_ * shift));
    case Kind::Box:
      return box(Vec(lo_ + shift), Vec(hi_ + shift));
    case Kind::Singleton:
      return singleton(Vec(z_ + shift));
    case Kind::WholeSpace:
      return whole_space(dim_);
  }
  return *this;
}

// ---------------------------------------------------------------------------
// ConvexFunction node

namespace kinds {

struct Zero {
  Eigen::Index dim;
};
struct Quadratic {
  Mat Q;
  Vec c;
  double r;
};
struct AbsoluteSum {
  Eigen::Index dim;
};
struct IndicatorAffine {
  Mat A;
  Vec b;
};
struct IndicatorBox {
  Vec lo, hi;
};
struct SqDistToAffine {
  Mat A;
  Vec b;
};
struct SqDistToBox {
  Vec lo, hi;
};
struct SupportOfBall {
  Eigen::Index dim;
  double radius;
};
struct IndicatorBall {
  Eigen::Index dim;
  double radius;
};
struct Sum {
  ConvexFunction f, g;
};
struct Separable {
  std::vector<ConvexFunction> blocks;
};
struct Precompose {
  ConvexFunction f;
  Mat L;
};
struct Scale {
  ConvexFunction f;
  double c;
};
struct Translate {
  ConvexFunction f;
  Vec shift;
};

}  // namespace kinds

using NodeVariant =
    std::variant<kinds::Zero, kinds::Quadratic, kinds::AbsoluteSum, kinds::IndicatorAffine, kinds::IndicatorBox,
                 kinds::SqDistToAffine, kinds::SqDistToBox, kinds::SupportOfBall, kinds::IndicatorBall, kinds::Sum,
                 kinds::Separable, kinds::Precompose, kinds::Scale, kinds::Translate>;

struct ConvexFunction::Node {
  NodeVariant v;
  Eigen::Index dim = 0;
  bool closed_conjugate = false;
  std::optional<ArgminSet> argmin;
  std::optional<QuadraticForm> quad_form;
};

namespace {

using QF = ConvexFunction::QuadraticForm;

std::optional<QF> compute_quadratic_form(const NodeVariant& v);
std::optional<ArgminSet> compute_argmin_set(const NodeVariant& v, Eigen::Index dim,
                                            const std::optional<QF>& qf);
bool compute_closed_conjugate(const NodeVariant& v, const std::optional<QF>& qf);
Eigen::Index node_dim(const NodeVariant& v);

std::shared_ptr<const ConvexFunction::Node> make_node(NodeVariant v) {
  auto n = std::make_shared<ConvexFunction::Node>();
  n->dim = node_dim(v);
  n->quad_form = compute_quadratic_form(v);
  n->argmin = compute_argmin_set(v, n->dim, n->quad_form);
  n->closed_conjugate = compute_closed_conjugate(v, n->quad_form);
  n->v = std::move(v);
  return n;
}

Eigen::Index node_dim(const NodeVariant& v) {
  return std::visit(
      [](const auto& k) -> Eigen::Index {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, kinds::Zero> || std::is_same_v<T, kinds::AbsoluteSum> ||
                      std::is_same_v<T, kinds::SupportOfBall> || std::is_same_v<T, kinds::IndicatorBall>)
          return k.dim;
        else if constexpr (std::is_same_v<T, kinds::Quadratic>)
          return k.Q.cols();
        else if constexpr (std::is_same_v<T, kinds::IndicatorAffine> || std::is_same_v<T, kinds::SqDistToAffine>)
          return k.A.cols();
        else if constexpr (std::is_same_v<T, kinds::IndicatorBox> || std::is_same_v<T, kinds::SqDistToBox>)
          return k.lo.size();
        else if constexpr (std::is_same_v<T, kinds::Sum>)
          return k.f.dim();
        else if constexpr (std::is_same_v<T, kinds::Separable>) {
          Eigen::Index d = 0;
          for (const auto& b : k.blocks) d += b.dim();
          return d;
        } else if constexpr (std::is_same_v<T, kinds::Precompose>)
          return k.L.cols();
        else if constexpr (std::is_same_v<T, kinds::Scale>)
          return k.f.dim();
        else
          return k.f.dim();
      },
      v);
}

std::optional<QF> compute_quadratic_form(const NodeVariant& v) {
  return std::visit(
      [](const auto& k) -> std::optional<QF> {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, kinds::Zero>) {
          return QF{Mat::Zero(k.dim, k.dim), Vec::Zero(k.dim), 0.0};
        } else if constexpr (std::is_same_v<T, kinds::Quadratic>) {
          return QF{k.Q, k.c, k.r};
        } else if constexpr (std::is_same_v<T, kinds::SqDistToAffine>) {
          // 1/2 dist^2(x, {Ax=b}) = 1/2 (x-x0)' P (x-x0), P the projector onto range(A')
          const Mat P = pseudo_inverse(k.A) * k.A;
          const Vec x0 = lsq_min_norm(k.A, k.b);
          return QF{P, Vec(-P * x0), 0.5 * x0.dot(P * x0)};
        } else if constexpr (std::is_same_v<T, kinds::Sum>) {
          const auto &a = k.f.quadratic_form(), &b = k.g.quadratic_form();
          if (!a || !b) return std::nullopt;
          return QF{Mat(a->G + b->G), Vec(a->g + b->g), a->r + b->r};
        } else if constexpr (std::is_same_v<T, kinds::Separable>) {
          Eigen::Index d = 0;
          for (const auto& blk : k.blocks) {
            if (!blk.quadratic_form()) return std::nullopt;
            d += blk.dim();
          }
          QF out{Mat::Zero(d, d), Vec::Zero(d), 0.0};
          Eigen::Index off = 0;
          for (const auto& blk : k.blocks) {
            const auto& q = *blk.quadratic_form();
            const Eigen::Index bd = blk.dim();
            out.G.block(off, off, bd, bd) = q.G;
            out.g.segment(off, bd) = q.g;
            out.r += q.r;
            off += bd;
          }
          return out;
        } else if constexpr (std::is_same_v<T, kinds::Precompose>) {
          const auto& q = k.f.quadratic_form();
          if (!q) return std::nullopt;
          return QF{Mat(k.L.transpose() * q->G * k.L), Vec(k.L.transpose() * q->g), q->r};
        } else if constexpr (std::is_same_v<T, kinds::Scale>) {
          const auto& q = k.f.quadratic_form();
          if (!q) return std::nullopt;
          return QF{Mat(k.c * q->G), Vec(k.c * q->g), k.c * q->r};
        } else if constexpr (std::is_same_v<T, kinds::Translate>) {
          const auto& q = k.f.quadratic_form();
          if (!q) return std::nullopt;
          const Vec& s = k.shift;
          return QF{q->G, Vec(q->g - q->G * s), 0.5 * s.dot(q->G * s) - q->g.dot(s) + q->r};
        } else {
          return std::nullopt;
        }
      },
      v);
}

std::optional<ArgminSet> compute_argmin_set(const NodeVariant& v, Eigen::Index dim, const std::optional<QF>& qf) {
  auto from_qf = [&]() -> std::optional<ArgminSet> {
    if (!qf) return std::nullopt;
    // minimizers solve Gx = -g; empty when inconsistent (unbounded below)
    const Vec x = lsq_min_norm(qf->G, Vec(-qf->g));
    if ((qf->G * x + qf->g).norm() > 1e-9 * (1.0 + qf->g.norm())) return std::nullopt;
    Eigen::FullPivLU<Mat> lu(qf->G);
    lu.setThreshold(1e-10);
    if (lu.rank() == dim) return ArgminSet::singleton(x);
    return ArgminSet::affine(qf->G, Vec(-qf->g));
  };
  return std::visit(
      [&](const auto& k) -> std::optional<ArgminSet> {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, kinds::Zero>)
          return ArgminSet::whole_space(k.dim);
        else if constexpr (std::is_same_v<T, kinds::Quadratic>)
          return from_qf();
        else if constexpr (std::is_same_v<T, kinds::AbsoluteSum>)
          return ArgminSet::singleton(Vec::Zero(k.dim));
        else if constexpr (std::is_same_v<T, kinds::IndicatorAffine>)
          return ArgminSet::affine(k.A, k.b);
        else if constexpr (std::is_same_v<T, kinds::IndicatorBox>)
          return ArgminSet::box(k.lo, k.hi);
        else if constexpr (std::is_same_v<T, kinds::SqDistToAffine>)
          return ArgminSet::affine(k.A, k.b);
        else if constexpr (std::is_same_v<T, kinds::SqDistToBox>)
          return ArgminSet::box(k.lo, k.hi);
        else if constexpr (std::is_same_v<T, kinds::SupportOfBall>)
          return ArgminSet::singleton(Vec::Zero(k.dim));
        else if constexpr (std::is_same_v<T, kinds::IndicatorBall>)
          return std::nullopt;  // a ball is not representable here
        else if constexpr (std::is_same_v<T, kinds::Sum>)
          return from_qf();
        else if constexpr (std::is_same_v<T, kinds::Separable>) {
          // merge as one box when every block is box-like, else one affine set
          bool boxable = true, affinable = true;
          for (const auto& blk : k.blocks) {
            if (!blk.has_argmin_set()) return from_qf();
            switch (blk.argmin_set()->kind()) {
              case ArgminSet::Kind::Box:
                affinable = false;
                break;
              case ArgminSet::Kind::Affine:
                boxable = false;
                break;
              default:
                break;
            }
          }
          if (boxable) {
            Vec lo(dim), hi(dim);
            Eigen::Index off = 0;
            for (const auto& blk : k.blocks) {
              const auto& s = *blk.argmin_set();
              const Eigen::Index bd = blk.dim();
              switch (s.kind()) {
                case ArgminSet::Kind::Box:
                  lo.segment(off, bd) = s.box_lo();
                  hi.segment(off, bd) = s.box_hi();
                  break;
                case ArgminSet::Kind::Singleton:
                  lo.segment(off, bd) = s.point();
                  hi.segment(off, bd) = s.point();
                  break;
                default:
                  lo.segment(off, bd).setConstant(-kInf);
                  hi.segment(off, bd).setConstant(kInf);
                  break;
              }
              off += bd;
            }
            return ArgminSet::box(lo, hi);
          }
          if (affinable) {
            Eigen::Index rows = 0;
            for (const auto& blk : k.blocks) {
              const auto& s = *blk.argmin_set();
              if (s.kind() == ArgminSet::Kind::Affine) rows += s.affine_matrix().rows();
              if (s.kind() == ArgminSet::Kind::Singleton) rows += blk.dim();
            }
            Mat A = Mat::Zero(rows, dim);
            Vec b = Vec::Zero(rows);
            Eigen::Index off = 0, ro = 0;
            for (const auto& blk : k.blocks) {
              const auto& s = *blk.argmin_set();
              const Eigen::Index bd = blk.dim();
              if (s.kind() == ArgminSet::Kind::Affine) {
                const Eigen::Index br = s.affine_matrix().rows();
                A.block(ro, off, br, bd) = s.affine_matrix();
                b.segment(ro, br) = s.affine_rhs();
                ro += br;
              } else if (s.kind() == ArgminSet::Kind::Singleton) {
                A.block(ro, off, bd, bd).setIdentity();
                b.segment(ro, bd) = s.point();
                ro += bd;
              }
              off += bd;
            }
            return ArgminSet::affine(A, b);
          }
          return from_qf();
        } else if constexpr (std::is_same_v<T, kinds::Precompose>) {
          if (k.f.has_argmin_set()) {
            const auto& inner = *k.f.argmin_set();
            std::optional<ArgminSet> pre;
            if (inner.kind() == ArgminSet::Kind::Singleton) {
              if ((k.L * lsq_min_norm(k.L, inner.point()) - inner.point()).norm() <=
                  1e-9 * (1.0 + inner.point().norm()))
                pre = ArgminSet::affine(k.L, inner.point());
            } else if (inner.kind() == ArgminSet::Kind::Affine) {
              const Mat AL = inner.affine_matrix() * k.L;
              const Vec x = lsq_min_norm(AL, inner.affine_rhs());
              if ((AL * x - inner.affine_rhs()).norm() <= 1e-9 * (1.0 + inner.affine_rhs().norm()))
                pre = ArgminSet::affine(AL, inner.affine_rhs());
            } else if (inner.kind() == ArgminSet::Kind::WholeSpace) {
              pre = ArgminSet::whole_space(dim);
            }
            if (pre) return pre;
          }
          return from_qf();
        } else if constexpr (std::is_same_v<T, kinds::Scale>) {
          return k.f.argmin_set();
        } else if constexpr (std::is_same_v<T, kinds::Translate>) {
          if (!k.f.has_argmin_set()) return std::nullopt;
          return k.f.argmin_set()->translated(k.shift);
        } else {
          return std::nullopt;
        }
      },
      v);
}

bool compute_closed_conjugate(const NodeVariant& v, const std::optional<QF>& qf) {
  return std::visit(
      [&](const auto& k) -> bool {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, kinds::AbsoluteSum> || std::is_same_v<T, kinds::IndicatorAffine> ||
                      std::is_same_v<T, kinds::IndicatorBox> || std::is_same_v<T, kinds::SqDistToAffine> ||
                      std::is_same_v<T, kinds::SqDistToBox> || std::is_same_v<T, kinds::SupportOfBall> ||
                      std::is_same_v<T, kinds::IndicatorBall>)
          return true;
        else if constexpr (std::is_same_v<T, kinds::Scale> || std::is_same_v<T, kinds::Translate>)
          return k.f.has_closed_conjugate();
        else if constexpr (std::is_same_v<T, kinds::Separable>) {
          return std::all_of(k.blocks.begin(), k.blocks.end(),
                             [](const ConvexFunction& b) { return b.has_closed_conjugate(); });
        } else
          return qf.has_value();
      },
      v);
}

void check_symmetric_psd(Mat& Q) {
  require(Q.rows() == Q.cols(), "quadratic: Q must be square");
  require((Q - Q.transpose()).lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + Q.lpNorm<Eigen::Infinity>()),
          "quadratic: Q must be symmetric");
  Q = 0.5 * (Q + Q.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(Q, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = std::max(1.0, std::abs(es.eigenvalues().maxCoeff()));
  require(lo >= -1e-10 * hi, "quadratic: Q must be positive semidefinite");
}

}  // namespace

// ---------------------------------------------------------------------------
// factories

ConvexFunction ConvexFunction::zero(Eigen::Index dim) {
  require(dim > 0, "zero: dimension must be positive");
  return ConvexFunction(make_node(kinds::Zero{dim}));
}

ConvexFunction ConvexFunction::quadratic(Mat Q, Vec c, double r) {
  check_symmetric_psd(Q);
  require(Q.cols() == c.size(), "quadratic: c dimension mismatch");
  return ConvexFunction(make_node(kinds::Quadratic{std::move(Q), std::move(c), r}));
}

ConvexFunction ConvexFunction::absolute_sum(Eigen::Index dim) {
  require(dim > 0, "absolute_sum: dimension must be positive");
  return ConvexFunction(make_node(kinds::AbsoluteSum{dim}));
}

ConvexFunction ConvexFunction::indicator_affine(Mat A, Vec b) {
  ArgminSet::affine(A, b);  // validates feasibility
  return ConvexFunction(make_node(kinds::IndicatorAffine{std::move(A), std::move(b)}));
}

ConvexFunction ConvexFunction::indicator_box(Vec lo, Vec hi) {
  ArgminSet::box(lo, hi);
  return ConvexFunction(make_node(kinds::IndicatorBox{std::move(lo), std::move(hi)}));
}

ConvexFunction ConvexFunction::sq_dist_to_affine(Mat A, Vec b) {
  ArgminSet::affine(A, b);
  return ConvexFunction(make_node(kinds::SqDistToAffine{std::move(A), std::move(b)}));
}

ConvexFunction ConvexFunction::sq_dist_to_box(Vec lo, Vec hi) {
  ArgminSet::box(lo, hi);
  return ConvexFunction(make_node(kinds::SqDistToBox{std::move(lo), std::move(hi)}));
}

ConvexFunction ConvexFunction::support_of_ball(Eigen::Index dim, double radius) {
  require(dim > 0 && radius > 0.0, "support_of_ball: needs dim > 0, radius > 0");
  return ConvexFunction(make_node(kinds::SupportOfBall{dim, radius}));
}

ConvexFunction ConvexFunction::indicator_ball(Eigen::Index dim, double radius) {
  require(dim > 0 && radius > 0.0, "indicator_ball: needs dim > 0, radius > 0");
  return ConvexFunction(make_node(kinds::IndicatorBall{dim, radius}));
}

ConvexFunction ConvexFunction::sum(ConvexFunction f, ConvexFunction g) {
  require(f.dim() == g.dim(), "sum: dimension mismatch");
  return ConvexFunction(make_node(kinds::Sum{std::move(f), std::move(g)}));
}

ConvexFunction ConvexFunction::separable(std::vector<ConvexFunction> blocks) {
  require(!blocks.empty(), "separable: needs at least one block");
  return ConvexFunction(make_node(kinds::Separable{std::move(blocks)}));
}

ConvexFunction ConvexFunction::precompose(ConvexFunction f, Mat L) {
  require(L.rows() == f.dim(), "precompose: L rows must match inner dimension");
  require(L.cols() > 0, "precompose: empty domain");
  return ConvexFunction(make_node(kinds::Precompose{std::move(f), std::move(L)}));
}

ConvexFunction ConvexFunction::scale(ConvexFunction f, double c) {
  require(c > 0.0, "scale: factor must be positive");
  return ConvexFunction(make_node(kinds::Scale{std::move(f), c}));
}

ConvexFunction ConvexFunction::translate(ConvexFunction f, Vec shift) {
  require(shift.size() == f.dim(), "translate: shift dimension mismatch");
  return ConvexFunction(make_node(kinds::Translate{std::move(f), std::move(shift)}));
}

ConvexFunction ConvexFunction::least_squares(const Mat& A, const Vec& b) {
  require(A.rows() == b.size(), "least_squares: A rows must match b length");
  const Eigen::Index m = A.rows();
  return precompose(quadratic(Mat::Identity(m, m), Vec(-b), 0.5 * b.squaredNorm()), A);
}

Eigen::Index ConvexFunction::dim() const { return node_->dim; }
bool ConvexFunction::has_closed_conjugate() const { return node_->closed_conjugate; }
bool ConvexFunction::has_argmin_set() const { return node_->argmin.has_value(); }
const std::optional<ArgminSet>& ConvexFunction::argmin_set() const { return node_->argmin; }
const std::optional<ConvexFunction::QuadraticForm>& ConvexFunction::quadratic_form() const {
  return node_->quad_form;
}

// ---------------------------------------------------------------------------
// eval

double eval(const ConvexFunction& f, const Vec& x) {
  require(x.size() == f.dim(), "eval: dimension mismatch");
  require(all_finite(x), "eval: point must be finite");
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, kinds::Zero>)
          return 0.0;
        else if constexpr (std::is_same_v<T, kinds::Quadratic>)
          return 0.5 * x.dot(k.Q * x) + k.c.dot(x) + k.r;
        else if constexpr (std::is_same_v<T, kinds::AbsoluteSum>)
          return x.lpNorm<1>();
        else if constexpr (std::is_same_v<T, kinds::IndicatorAffine>)
          return Vec(k.A * x - k.b).lpNorm<Eigen::Infinity>() <= kMembershipTol ? 0.0 : kInf;
        else if constexpr (std::is_same_v<T, kinds::IndicatorBox>)
          return ((x.array() >= k.lo.array() - kMembershipTol).all() &&
                  (x.array() <= k.hi.array() + kMembershipTol).all())
                     ? 0.0
                     : kInf;
        else if constexpr (std::is_same_v<T, kinds::SqDistToAffine>) {
          const Vec r = k.A * x - k.b;
          const Vec corr = k.A.completeOrthogonalDecomposition().solve(r);
          return 0.5 * corr.squaredNorm();
        } else if constexpr (std::is_same_v<T, kinds::SqDistToBox>)
          return 0.5 * (x - clamp(x, k.lo, k.hi)).squaredNorm();
        else if constexpr (std::is_same_v<T, kinds::SupportOfBall>)
          return k.radius * x.norm();
        else if constexpr (std::is_same_v<T, kinds::IndicatorBall>)
          return x.norm() <= k.radius + kMembershipTol ? 0.0 : kInf;
        else if constexpr (std::is_same_v<T, kinds::Sum>) {
          const double a = eval(k.f, x);
          if (a == kInf) return kInf;
          const double b = eval(k.g, x);
          return b == kInf ? kInf : a + b;
        } else if constexpr (std::is_same_v<T, kinds::Separable>) {
          double s = 0.0;
          Eigen::Index off = 0;
          for (const auto& blk : k.blocks) {
            const double v = eval(blk, x.segment(off, blk.dim()));
            if (v == kInf) return kInf;
            s += v;
            off += blk.dim();
          }
          return s;
        } else if constexpr (std::is_same_v<T, kinds::Precompose>)
          return eval(k.f, Vec(k.L * x));
        else if constexpr (std::is_same_v<T, kinds::Scale>) {
          const double v = eval(k.f, x);
          return v == kInf ? kInf : k.c * v;
        } else
          return eval(k.f, Vec(x - k.shift));
      },
      f.node().v);
}

// ---------------------------------------------------------------------------
// prox

namespace {

Vec soft_threshold(const Vec& x, double t) {
  return x.unaryExpr([t](double v) { return v > t ? v - t : (v < -t ? v + t : 0.0); });
}

// prox of f(u) + (p/2)|u - y|^2 with prox parameter mu:
// equals prox of f at a recentered point with a combined parameter.
ProxResult prox_with_quadratic_anchor(const ConvexFunction& f, double mu, const Vec& v, double p, const Vec& y) {
  const double q = 1.0 / mu;
  const double lam_eff = 1.0 / (p + q);
  const Vec center = (p * y + q * v) * lam_eff;
  return prox_detailed(f, lam_eff, center);
}

// Douglas-Rachford loop computing prox of (f + g) at x with parameter lambda.
ProxResult prox_sum_splitting(const ConvexFunction& f, const ConvexFunction& g, double lambda, const Vec& x) {
  const double mu = lambda;
  Vec y = x;
  Vec u = x, w = x;
  double res = kInf;
  for (int it = 0; it < kSplitMaxIter; ++it) {
    u = prox_with_quadratic_anchor(f, mu, y, 1.0 / lambda, x).point;
    w = prox(g, mu, Vec(2.0 * u - y));
    const Vec shift = w - u;
    y += shift;
    res = shift.norm();
    if (res <= kSplitTol) return {u, res};
  }
  throw NumericalError("prox: Douglas-Rachford splitting did not reach residual target", res);
}

// ADMM loop computing prox of f(L u) at x with parameter lambda.
ProxResult prox_compose_splitting(const ConvexFunction& f, const Mat& L, double lambda, const Vec& x) {
  const double rho = 1.0;
  const Eigen::Index n = L.cols();
  const Mat K = Mat::Identity(n, n) / lambda + rho * (L.transpose() * L);
  const Eigen::LLT<Mat> llt(K);
  if (llt.info() != Eigen::Success) throw NumericalError("prox: composed subproblem factorization failed");
  Vec z = L * x, w = Vec::Zero(L.rows());
  Vec u = x;
  double res = kInf;
  for (int it = 0; it < kSplitMaxIter; ++it) {
    u = llt.solve(x / lambda + rho * (L.transpose() * (z - w)));
    const Vec Lu = L * u;
    const Vec z_prev = z;
    z = prox(f, 1.0 / rho, Vec(Lu + w));
    w += Lu - z;
    const double primal = (Lu - z).norm();
    const double dual = rho * (L.transpose() * (z - z_prev)).norm();
    res = std::max(primal, dual);
    if (res <= kSplitTol) return {u, res};
  }
  throw NumericalError("prox: ADMM splitting did not reach residual target", res);
}

}  // namespace

ProxResult prox_detailed(const ConvexFunction& f, double lambda, const Vec& x) {
  require(lambda > 0.0, "prox: lambda must be positive");
  require(x.size() == f.dim(), "prox: dimension mismatch");
  require(all_finite(x), "prox: point must be finite");
  return std::visit(
      [&](const auto& k) -> ProxResult {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, kinds::Zero>)
          return {x, 0.0};
        else if constexpr (std::is_same_v<T, kinds::Quadratic>) {
          const Eigen::Index n = x.size();
          const Mat K = Mat::Identity(n, n) + lambda * k.Q;
          return {Vec(Eigen::LLT<Mat>(K).solve(Vec(x - lambda * k.c))), 0.0};
        } else if constexpr (std::is_same_v<T, kinds::AbsoluteSum>)
          return {soft_threshold(x, lambda), 0.0};
        else if constexpr (std::is_same_v<T, kinds::IndicatorAffine>)
          return {Vec(x - k.A.completeOrthogonalDecomposition().solve(Vec(k.A * x - k.b))), 0.0};
        else if constexpr (std::is_same_v<T, kinds::IndicatorBox>)
          return {clamp(x, k.lo, k.hi), 0.0};
        else if constexpr (std::is_same_v<T, kinds::SqDistToAffine>) {
          const Vec px = x - k.A.completeOrthogonalDecomposition().solve(Vec(k.A * x - k.b));
          return {Vec((x + lambda * px) / (1.0 + lambda)), 0.0};
        } else if constexpr (std::is_same_v<T, kinds::SqDistToBox>) {
          const Vec px = clamp(x, k.lo, k.hi);
          return {Vec((x + lambda * px) / (1.0 + lambda)), 0.0};
        } else if constexpr (std::is_same_v<T, kinds::SupportOfBall>) {
          const double n = x.norm();
          const double t = lambda * k.radius;
          if (n <= t) return {Vec(Vec::Zero(x.size())), 0.0};
          return {Vec(x * (1.0 - t / n)), 0.0};
        } else if constexpr (std::is_same_v<T, kinds::IndicatorBall>) {
          const double n = x.norm();
          if (n <= k.radius) return {x, 0.0};
          return {Vec(x * (k.radius / n)), 0.0};
        } else if constexpr (std::is_same_v<T, kinds::Sum>) {
          if (const auto& qf = f.quadratic_form()) {
            const Mat K = Mat::Identity(x.size(), x.size()) + lambda * qf->G;
            return {Vec(Eigen::LLT<Mat>(K).solve(Vec(x - lambda * qf->g))), 0.0};
          }
          return prox_sum_splitting(k.f, k.g, lambda, x);
        } else if constexpr (std::is_same_v<T, kinds::Separable>) {
          Vec out(x.size());
          double res = 0.0;
          Eigen::Index off = 0;
          for (const auto& blk : k.blocks) {
            auto pr = prox_detailed(blk, lambda, Vec(x.segment(off, blk.dim())));
            out.segment(off, blk.dim()) = pr.point;
            res = std::max(res, pr.residual);
            off += blk.dim();
          }
          return {out, res};
        } else if constexpr (std::is_same_v<T, kinds::Precompose>) {
          if (const auto& qf = f.quadratic_form()) {
            const Mat K = Mat::Identity(x.size(), x.size()) + lambda * qf->G;
            return {Vec(Eigen::LLT<Mat>(K).solve(Vec(x - lambda * qf->g))), 0.0};
          }
          return prox_compose_splitting(k.f, k.L, lambda, x);
        } else if constexpr (std::is_same_v<T, kinds::Scale>)
          return prox_detailed(k.f, lambda * k.c, x);
        else {
          auto pr = prox_detailed(k.f, lambda, Vec(x - k.shift));
          return {Vec(pr.point + k.shift), pr.residual};
        }
      },
      f.node().v);
}

Vec prox(const ConvexFunction& f, double lambda, const Vec& x) { return prox_detailed(f, lambda, x).point; }

// ---------------------------------------------------------------------------
// conjugate

namespace {

// f*(y) for quadratic f = 1/2 x'Gx + g'x + r; finite iff y - g in range(G)
double quadratic_conjugate(const QF& qf, const Vec& y) {
  const Vec d = y - qf.g;
  const Vec u = lsq_min_norm(qf.G, d);
  if ((qf.G * u - d).norm() > 1e-9 * (1.0 + d.norm())) return kInf;
  return 0.5 * d.dot(u) - qf.r;
}

}  // namespace

double conjugate(const ConvexFunction& f, const Vec& y) {
  require(y.size() == f.dim(), "conjugate: dimension mismatch");
  require(all_finite(y), "conjugate: point must be finite");
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, kinds::Zero> || std::is_same_v<T, kinds::Quadratic>)
          return quadratic_conjugate(*f.quadratic_form(), y);
        else if constexpr (std::is_same_v<T, kinds::AbsoluteSum>)
          return y.lpNorm<Eigen::Infinity>() <= 1.0 + kMembershipTol ? 0.0 : kInf;
        else if constexpr (std::is_same_v<T, kinds::IndicatorAffine>)
          return ArgminSet::affine(k.A, k.b).support(y);
        else if constexpr (std::is_same_v<T, kinds::IndicatorBox>)
          return ArgminSet::box(k.lo, k.hi).support(y);
        else if constexpr (std::is_same_v<T, kinds::SqDistToAffine>)
          return 0.5 * y.squaredNorm() + ArgminSet::affine(k.A, k.b).support(y);
        else if constexpr (std::is_same_v<T, kinds::SqDistToBox>)
          return 0.5 * y.squaredNorm() + ArgminSet::box(k.lo, k.hi).support(y);
        else if constexpr (std::is_same_v<T, kinds::SupportOfBall>)
          return y.norm() <= k.radius + kMembershipTol ? 0.0 : kInf;
        else if constexpr (std::is_same_v<T, kinds::IndicatorBall>)
          return k.radius * y.norm();
        else if constexpr (std::is_same_v<T, kinds::Separable>) {
          double s = 0.0;
          Eigen::Index off = 0;
          for (const auto& blk : k.blocks) {
            const double v = conjugate(blk, Vec(y.segment(off, blk.dim())));
            if (v == kInf) return kInf;
            s += v;
            off += blk.dim();
          }
          return s;
        } else if constexpr (std::is_same_v<T, kinds::Scale>) {
          const double v = conjugate(k.f, Vec(y / k.c));
          return v == kInf ? kInf : k.c * v;
        } else if constexpr (std::is_same_v<T, kinds::Translate>) {
          const double v = conjugate(k.f, y);
          return v == kInf ? kInf : v + k.shift.dot(y);
        } else {
          if (const auto& qf = f.quadratic_form()) return quadratic_conjugate(*qf, y);
          if (f.dim() <= 2) return conjugate_numeric(f, y);
          throw InvalidInput("conjugate: no closed form and dimension > 2");
        }
      },
      f.node().v);
}

double conjugate_numeric(const ConvexFunction& f, const Vec& y) {
  require(f.dim() <= 2, "conjugate_numeric: only dimensions 1 and 2 are supported");
  const Eigen::Index d = f.dim();
  const double R = 10.0 * (1.0 + y.norm());
  Vec center = Vec::Zero(d);
  double half = R;
  double best = -kInf;
  Vec best_x = center;
  const int per_axis = d == 1 ? 1000 : 100;
  for (int pass = 0; pass < 3; ++pass) {
    const double step = 2.0 * half / per_axis;
    if (d == 1) {
      for (int i = 0; i <= per_axis; ++i) {
        Vec x(1);
        x[0] = center[0] - half + i * step;
        const double fx = eval(f, x);
        if (fx == kInf) continue;
        const double v = y.dot(x) - fx;
        if (v > best) {
          best = v;
          best_x = x;
        }
      }
    } else {
      for (int i = 0; i <= per_axis; ++i) {
        for (int j = 0; j <= per_axis; ++j) {
          Vec x(2);
          x[0] = center[0] - half + i * step;
          x[1] = center[1] - half + j * step;
          const double fx = eval(f, x);
          if (fx == kInf) continue;
          const double v = y.dot(x) - fx;
          if (v > best) {
            best = v;
            best_x = x;
          }
        }
      }
    }
    center = best_x;
    half = 2.0 * step;
  }
  return best;
}

// ---------------------------------------------------------------------------
// prox of the conjugate (independent formulas, used by the Moreau suite)

Vec prox_of_conjugate(const ConvexFunction& f, double lambda, const Vec& x) {
  require(lambda > 0.0, "prox_of_conjugate: lambda must be positive");
  require(x.size() == f.dim(), "prox_of_conjugate: dimension mismatch");
  return std::visit(
      [&](const auto& k) -> Vec {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, kinds::Zero>) {
          return Vec::Zero(x.size());  // conjugate is the indicator of {0}
        } else if constexpr (std::is_same_v<T, kinds::Quadratic>) {
          Eigen::FullPivLU<Mat> lu(k.Q);
          lu.setThreshold(1e-10);
          require(lu.isInvertible(), "prox_of_conjugate: quadratic part must be positive definite");
          const Mat Qi = lu.inverse();
          const Vec ci = -Qi * k.c;
          const Mat K = Mat::Identity(x.size(), x.size()) + lambda * Qi;
          return Eigen::LLT<Mat>(K).solve(Vec(x - lambda * ci));
        } else if constexpr (std::is_same_v<T, kinds::AbsoluteSum>) {
          return clamp(x, Vec::Constant(x.size(), -1.0), Vec::Constant(x.size(), 1.0));
        } else if constexpr (std::is_same_v<T, kinds::IndicatorAffine>) {
          // conjugate = <x0, .> + indicator of range(A')
          const Mat P = pseudo_inverse(k.A) * k.A;  // projector onto range(A')
          const Vec x0 = lsq_min_norm(k.A, k.b);
          return P * (x - lambda * x0);
        } else if constexpr (std::is_same_v<T, kinds::IndicatorBox>) {
          Vec out(x.size());
          for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (x[i] > lambda * k.hi[i])
              out[i] = x[i] - lambda * k.hi[i];
            else if (x[i] < lambda * k.lo[i])
              out[i] = x[i] - lambda * k.lo[i];
            else
              out[i] = 0.0;
          }
          return out;
        } else if constexpr (std::is_same_v<T, kinds::SqDistToAffine>) {
          const Mat P = pseudo_inverse(k.A) * k.A;
          const Vec x0 = lsq_min_norm(k.A, k.b);
          return P * (x - lambda * x0) / (1.0 + lambda);
        } else if constexpr (std::is_same_v<T, kinds::SqDistToBox>) {
          Vec out(x.size());
          for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (x[i] > lambda * k.hi[i])
              out[i] = (x[i] - lambda * k.hi[i]) / (1.0 + lambda);
            else if (x[i] < lambda * k.lo[i])
              out[i] = (x[i] - lambda * k.lo[i]) / (1.0 + lambda);
            else
              out[i] = 0.0;
          }
          return out;
        } else if constexpr (std::is_same_v<T, kinds::SupportOfBall>) {
          const double n = x.norm();
          if (n <= k.radius) return x;
          return Vec(x * (k.radius / n));
        } else if constexpr (std::is_same_v<T, kinds::IndicatorBall>) {
          const double n = x.norm();
          const double t = lambda * k.radius;
          if (n <= t) return Vec::Zero(x.size());
          return Vec(x * (1.0 - t / n));
        } else if constexpr (std::is_same_v<T, kinds::Scale>) {
          // (c f)*(y) = c f*(y/c); prox via scaling identity
          return Vec(k.c * prox_of_conjugate(k.f, lambda / k.c, Vec(x / k.c)));
        } else if constexpr (std::is_same_v<T, kinds::Translate>) {
          // (f(. - s))* = f* + <s, .>
          return prox_of_conjugate(k.f, lambda, Vec(x - lambda * k.shift));
        } else {
          throw InvalidInput("prox_of_conjugate: unsupported for this combinator");
        }
      },
      f.node().v);
}

// ---------------------------------------------------------------------------
// argmin-set operations

namespace {
const ArgminSet& require_argmin(const ConvexFunction& f, const char* op) {
  if (!f.has_argmin_set()) throw InvalidInput(std::string(op) + ": function has no argmin-set capability");
  return *f.argmin_set();
}
}  // namespace

double support_of_argmin(const ConvexFunction& f, const Vec& y) {
  return require_argmin(f, "support_of_argmin").support(y);
}

Vec project_argmin(const ConvexFunction& f, const Vec& x) { return require_argmin(f, "project_argmin").project(x); }

bool normal_cone_contains(const ConvexFunction& f, const Vec& z, const Vec& p) {
  const ArgminSet& s = require_argmin(f, "normal_cone_contains");
  if (!s.contains(z, kMembershipTol)) throw InvalidInput("normal_cone_contains: base point is not in the argmin set");
  return s.normal_cone_contains(z, p);
}

ConvexFunction build_coupling(const Mat& L1, const Mat& L2) {
  require(L1.rows() == L2.rows(), "build_coupling: output dimensions must match");
  require(L1.rows() > 0 && L1.cols() > 0 && L2.cols() > 0, "build_coupling: empty operator");
  Mat M(L1.rows(), L1.cols() + L2.cols());
  M.leftCols(L1.cols()) = L1;
  M.rightCols(L2.cols()) = -L2;
  const Eigen::Index m = M.rows();
  return ConvexFunction::precompose(ConvexFunction::quadratic(Mat::Identity(m, m), Vec::Zero(m), 0.0), M);
}

}  // namespace mscale
