#pragma once

// Differentiable predictors h: R^p -> R^n with analytic Jacobians.
//
// A Predictor is stateless with respect to parameters: every evaluation takes
// the parameter vector and the input matrix explicitly, so one instance can be
// shared read-only across worker threads. `linearize` returns a LocalModel, the
// first-order snapshot (outputs, Dh·u, Dhᵀ·v, Gram) that the integrator and
// the NTK code consume without materializing the n×p Jacobian.

#include "lazysgld/activation.hpp"
#include "lazysgld/core.hpp"
#include "lazysgld/loss.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace lazysgld {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class LocalModel {
 public:
  virtual ~LocalModel() = default;

  const Vector& outputs() const { return outputs_; }
  Index num_outputs() const { return outputs_.size(); }

  virtual Index num_params() const = 0;
  /// Dhᵀ v for v ∈ R^n.
  virtual Vector pullback(const Vector& v) const = 0;
  /// Dh u for u ∈ R^p.
  virtual Vector pushforward(const Vector& u) const = 0;
  /// Row i is ∇_ω h_i.
  virtual Matrix jacobian() const = 0;
  /// Dh Dhᵀ.
  virtual Matrix gram() const {
    const Matrix j = jacobian();
    return j * j.transpose();
  }

 protected:
  explicit LocalModel(Vector outputs) : outputs_(std::move(outputs)) {}
  Vector outputs_;
};

class DenseLocalModel final : public LocalModel {
 public:
  DenseLocalModel(Vector outputs, Matrix jacobian)
      : LocalModel(std::move(outputs)), jac_(std::move(jacobian)) {}

  Index num_params() const override { return jac_.cols(); }
  Vector pullback(const Vector& v) const override { return jac_.transpose() * v; }
  Vector pushforward(const Vector& u) const override { return jac_ * u; }
  Matrix jacobian() const override { return jac_; }

 private:
  Matrix jac_;
};

class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual Index num_params() const = 0;
  virtual Index input_dim() const = 0;

  virtual Vector predict(const ParamVector& w, const Matrix& inputs) const {
    return linearize(w, inputs)->outputs();
  }

  virtual std::unique_ptr<LocalModel> linearize(const ParamVector& w,
                                                const Matrix& inputs) const = 0;

  Matrix jacobian(const ParamVector& w, const Matrix& inputs) const {
    return linearize(w, inputs)->jacobian();
  }

  /// Σ_i weights_i ∇²_ω h_i(ω). The generic version differentiates the
  /// analytic pullback by central differences; models with closed forms
  /// override it.
  virtual Matrix weighted_output_hessian(const ParamVector& w, const Matrix& inputs,
                                         const Vector& weights) const {
    check_arguments(w, inputs);
    require_dims(weights.size() == inputs.rows(), "hessian weights length mismatch");
    const Index p = num_params();
    Matrix h(p, p);
    ParamVector probe = w;
    for (Index k = 0; k < p; ++k) {
      const double step = 1e-5 * std::max(1.0, std::abs(w(k)));
      probe(k) = w(k) + step;
      const Vector up = linearize(probe, inputs)->pullback(weights);
      probe(k) = w(k) - step;
      const Vector down = linearize(probe, inputs)->pullback(weights);
      probe(k) = w(k);
      h.col(k) = (up - down) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
  }

  void check_arguments(const ParamVector& w, const Matrix& inputs) const {
    require_dims(w.size() == num_params(),
                 "parameter length " + std::to_string(w.size()) + " != model size " +
                     std::to_string(num_params()));
    require_dims(inputs.rows() > 0, "empty input set");
    require_dims(inputs.cols() == input_dim(),
                 "input dimension " + std::to_string(inputs.cols()) + " != " +
                     std::to_string(input_dim()));
  }
};

// ---------------------------------------------------------------------------
// Shallow tanh network  φ(x; ω, c) = (1/√m) Σ_j c_j tanh(ω_jᵀ x)
// Parameters are the hidden rows ω_j laid out row-major (index j·d + k); the
// output weights c are frozen at construction.

class ShallowLocalModel final : public LocalModel {
 public:
  ShallowLocalModel(Vector outputs, Matrix inputs, Vector scaled_c, Matrix dact)
      : LocalModel(std::move(outputs)),
        x_(std::move(inputs)),
        cs_(std::move(scaled_c)),
        dact_(std::move(dact)) {}

  Index num_params() const override { return cs_.size() * x_.cols(); }

  Vector pullback(const Vector& v) const override {
    require_dims(v.size() == x_.rows(), "pullback: length mismatch");
    Vector out(num_params());
    Eigen::Map<RowMajorMatrix> g(out.data(), cs_.size(), x_.cols());
    g.noalias() = dact_.transpose() * (v.asDiagonal() * x_);
    g = cs_.asDiagonal() * g;
    return out;
  }

  Vector pushforward(const Vector& u) const override {
    require_dims(u.size() == num_params(), "pushforward: length mismatch");
    // out_i = Σ_j σ'_ij c_j (ω̇_jᵀ x_i), contracted over units first so the
    // only temporary is n × d.
    Eigen::Map<const RowMajorMatrix> dir(u.data(), cs_.size(), x_.cols());
    const Matrix mixed = dact_ * (cs_.asDiagonal() * dir);
    return (mixed.array() * x_.array()).rowwise().sum().matrix();
  }

  Matrix jacobian() const override {
    const Index d = x_.cols();
    Matrix j(x_.rows(), num_params());
    for (Index unit = 0; unit < cs_.size(); ++unit) {
      j.middleCols(unit * d, d) = (cs_(unit) * dact_.col(unit)).asDiagonal() * x_;
    }
    return j;
  }

  Matrix gram() const override {
    const Matrix weighted = dact_ * cs_.array().square().matrix().asDiagonal() * dact_.transpose();
    const Matrix xx = x_ * x_.transpose();
    return (weighted.array() * xx.array()).matrix();
  }

 private:
  Matrix x_;
  Vector cs_;
  Matrix dact_;
};

class ShallowTanhNet final : public Predictor {
 public:
  ShallowTanhNet(Index input_dim, Vector output_weights)
      : d_(input_dim), c_(std::move(output_weights)) {
    if (d_ <= 0 || c_.size() <= 0) throw DimensionError("ShallowTanhNet: empty shape");
  }

  Index width() const { return c_.size(); }
  Index input_dim() const override { return d_; }
  Index num_params() const override { return c_.size() * d_; }
  const Vector& output_weights() const { return c_; }

  Eigen::Map<const RowMajorMatrix> hidden(const ParamVector& w) const {
    return Eigen::Map<const RowMajorMatrix>(w.data(), width(), d_);
  }

  Vector predict(const ParamVector& w, const Matrix& inputs) const override {
    check_arguments(w, inputs);
    const Matrix z = inputs * hidden(w).transpose();
    return tanh_array(z.array()).matrix() * scaled_c();
  }

  std::unique_ptr<LocalModel> linearize(const ParamVector& w,
                                        const Matrix& inputs) const override {
    check_arguments(w, inputs);
    const Matrix z = inputs * hidden(w).transpose();
    const Eigen::ArrayXXd t = tanh_array(z.array());
    const Vector cs = scaled_c();
    Vector out = t.matrix() * cs;
    Matrix dact = (1.0 - t.square()).matrix();
    return std::make_unique<ShallowLocalModel>(std::move(out), inputs, cs, std::move(dact));
  }

  /// Block diagonal: block j is (c_j/√m) Σ_i weights_i σ''(ω_jᵀx_i) x_i x_iᵀ.
  Matrix weighted_output_hessian(const ParamVector& w, const Matrix& inputs,
                                 const Vector& weights) const override {
    check_arguments(w, inputs);
    require_dims(weights.size() == inputs.rows(), "hessian weights length mismatch");
    const Matrix z = inputs * hidden(w).transpose();
    const Eigen::ArrayXXd t = tanh_array(z.array());
    const Eigen::ArrayXXd dd = -2.0 * t * (1.0 - t.square());
    const Vector cs = scaled_c();
    Matrix h = Matrix::Zero(num_params(), num_params());
    for (Index j = 0; j < width(); ++j) {
      const Vector s = (dd.col(j) * weights.array()).matrix();
      h.block(j * d_, j * d_, d_, d_) = cs(j) * (inputs.transpose() * s.asDiagonal() * inputs);
    }
    return h;
  }

 private:
  Vector scaled_c() const { return c_ / std::sqrt(static_cast<double>(c_.size())); }

  Index d_;
  Vector c_;
};

// ---------------------------------------------------------------------------
// Wrappers.

class ShiftedLocalModel final : public LocalModel {
 public:
  ShiftedLocalModel(std::unique_ptr<LocalModel> inner, const Vector& shift)
      : LocalModel(inner->outputs() - shift), inner_(std::move(inner)) {}

  Index num_params() const override { return inner_->num_params(); }
  Vector pullback(const Vector& v) const override { return inner_->pullback(v); }
  Vector pushforward(const Vector& u) const override { return inner_->pushforward(u); }
  Matrix jacobian() const override { return inner_->jacobian(); }
  Matrix gram() const override { return inner_->gram(); }

 private:
  std::unique_ptr<LocalModel> inner_;
};

namespace detail {

inline bool same_inputs(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace detail

/// h(ω) − h(ω₀): exactly zero at the frozen snapshot ω₀.
class CenteredPredictor final : public Predictor {
 public:
  /// `cache_inputs`, when given, precomputes h(ω₀) on that input set.
  CenteredPredictor(std::shared_ptr<const Predictor> base, ParamVector initial,
                    const Matrix* cache_inputs = nullptr)
      : base_(std::move(base)), w0_(std::move(initial)) {
    require_dims(w0_.size() == base_->num_params(), "CenteredPredictor: snapshot length");
    if (cache_inputs != nullptr) {
      cached_inputs_ = *cache_inputs;
      cached_offset_ = base_->predict(w0_, cached_inputs_);
    }
  }

  Index num_params() const override { return base_->num_params(); }
  Index input_dim() const override { return base_->input_dim(); }
  const ParamVector& initial_params() const { return w0_; }
  const Predictor& base() const { return *base_; }

  Vector predict(const ParamVector& w, const Matrix& inputs) const override {
    return base_->predict(w, inputs) - offset(inputs);
  }

  std::unique_ptr<LocalModel> linearize(const ParamVector& w,
                                        const Matrix& inputs) const override {
    return std::make_unique<ShiftedLocalModel>(base_->linearize(w, inputs), offset(inputs));
  }

  Matrix weighted_output_hessian(const ParamVector& w, const Matrix& inputs,
                                 const Vector& weights) const override {
    return base_->weighted_output_hessian(w, inputs, weights);
  }

 private:
  Vector offset(const Matrix& inputs) const {
    if (cached_offset_.size() > 0 && detail::same_inputs(inputs, cached_inputs_)) {
      return cached_offset_;
    }
    return base_->predict(w0_, inputs);
  }

  std::shared_ptr<const Predictor> base_;
  ParamVector w0_;
  Matrix cached_inputs_;
  Vector cached_offset_;
};

class LinearizedLocalModel final : public LocalModel {
 public:
  LinearizedLocalModel(std::shared_ptr<const LocalModel> anchor, Vector outputs)
      : LocalModel(std::move(outputs)), anchor_(std::move(anchor)) {}

  Index num_params() const override { return anchor_->num_params(); }
  Vector pullback(const Vector& v) const override { return anchor_->pullback(v); }
  Vector pushforward(const Vector& u) const override { return anchor_->pushforward(u); }
  Matrix jacobian() const override { return anchor_->jacobian(); }
  Matrix gram() const override { return anchor_->gram(); }

 private:
  std::shared_ptr<const LocalModel> anchor_;
};

/// h̄(ω) = h(ω₀) + Dh(ω₀)(ω − ω₀). The first-order snapshot of the base model
/// at ω₀ on `inputs` is cached; other input sets are linearized on demand.
class LinearizedPredictor final : public Predictor {
 public:
  LinearizedPredictor(std::shared_ptr<const Predictor> base, ParamVector initial,
                      const Matrix& inputs)
      : base_(std::move(base)), w0_(std::move(initial)), cached_inputs_(inputs) {
    require_dims(w0_.size() == base_->num_params(), "LinearizedPredictor: snapshot length");
    anchor_ = base_->linearize(w0_, cached_inputs_);
  }

  Index num_params() const override { return base_->num_params(); }
  Index input_dim() const override { return base_->input_dim(); }
  const ParamVector& initial_params() const { return w0_; }
  const Predictor& base() const { return *base_; }
  Matrix initial_jacobian() const { return anchor_->jacobian(); }

  Vector predict(const ParamVector& w, const Matrix& inputs) const override {
    return linearize(w, inputs)->outputs();
  }

  std::unique_ptr<LocalModel> linearize(const ParamVector& w,
                                        const Matrix& inputs) const override {
    check_arguments(w, inputs);
    std::shared_ptr<const LocalModel> anchor = anchor_for(inputs);
    Vector out = anchor->outputs() + anchor->pushforward(w - w0_);
    return std::make_unique<LinearizedLocalModel>(std::move(anchor), std::move(out));
  }

  Matrix weighted_output_hessian(const ParamVector& w, const Matrix& inputs,
                                 const Vector& weights) const override {
    check_arguments(w, inputs);
    require_dims(weights.size() == inputs.rows(), "hessian weights length mismatch");
    return Matrix::Zero(num_params(), num_params());
  }

 private:
  std::shared_ptr<const LocalModel> anchor_for(const Matrix& inputs) const {
    if (detail::same_inputs(inputs, cached_inputs_)) return anchor_;
    return base_->linearize(w0_, inputs);
  }

  std::shared_ptr<const Predictor> base_;
  ParamVector w0_;
  Matrix cached_inputs_;
  std::shared_ptr<const LocalModel> anchor_;
};

// ---------------------------------------------------------------------------
// Deep feedforward net
//   x^(k) = √(c_σ/m) σ(W^(k) x^(k−1)),  1 ≤ k ≤ H,    f(x) = aᵀ x^(H).
// Parameter layout: W^(1) (m×d), W^(2..H) (m×m), each row-major, then a (m).
// Layer index H+1 names the output vector a.

class DeepLocalModel final : public LocalModel {
 public:
  DeepLocalModel(Vector outputs, std::vector<Matrix> activations, std::vector<Matrix> dact,
                 std::vector<Matrix> backprop, std::vector<RowMajorMatrix> weights,
                 Vector head, double scale)
      : LocalModel(std::move(outputs)),
        acts_(std::move(activations)),
        dact_(std::move(dact)),
        back_(std::move(backprop)),
        weights_(std::move(weights)),
        head_(std::move(head)),
        scale_(scale) {}

  Index depth() const { return static_cast<Index>(weights_.size()); }

  Index num_params() const override {
    Index p = head_.size();
    for (const auto& w : weights_) p += w.size();
    return p;
  }

  Vector pullback(const Vector& v) const override {
    require_dims(v.size() == num_outputs(), "pullback: length mismatch");
    Vector out(num_params());
    Index off = 0;
    for (Index k = 0; k < depth(); ++k) {
      const auto& w = weights_[k];
      Eigen::Map<RowMajorMatrix> g(out.data() + off, w.rows(), w.cols());
      g.noalias() = (back_[k].array().colwise() * v.array()).matrix().transpose() * acts_[k];
      off += w.size();
    }
    out.segment(off, head_.size()) = acts_.back().transpose() * v;
    return out;
  }

  Vector pushforward(const Vector& u) const override {
    require_dims(u.size() == num_params(), "pushforward: length mismatch");
    Matrix dx = Matrix::Zero(acts_[0].rows(), acts_[0].cols());
    Index off = 0;
    for (Index k = 0; k < depth(); ++k) {
      const auto& w = weights_[k];
      Eigen::Map<const RowMajorMatrix> dw(u.data() + off, w.rows(), w.cols());
      const Matrix dz = dx * w.transpose() + acts_[k] * dw.transpose();
      dx = scale_ * (dact_[k].array() * dz.array()).matrix();
      off += w.size();
    }
    return dx * head_ + acts_.back() * u.segment(off, head_.size());
  }

  Matrix jacobian() const override {
    const Index n = num_outputs();
    Matrix j(n, num_params());
    Index off = 0;
    for (Index k = 0; k < depth(); ++k) {
      const Index rows = weights_[k].rows();
      const Index cols = weights_[k].cols();
      for (Index i = 0; i < n; ++i) {
        for (Index r = 0; r < rows; ++r) {
          j.block(i, off + r * cols, 1, cols) = back_[k](i, r) * acts_[k].row(i);
        }
      }
      off += rows * cols;
    }
    j.rightCols(head_.size()) = acts_.back();
    return j;
  }

  /// Contribution of layer k (1..H for W^(k), H+1 for a) to the Gram matrix.
  Matrix layer_gram(Index k) const {
    if (k < 1 || k > depth() + 1) {
      throw std::out_of_range("layer index " + std::to_string(k) + " outside 1.." +
                              std::to_string(depth() + 1));
    }
    if (k == depth() + 1) return acts_.back() * acts_.back().transpose();
    const Matrix gb = back_[k - 1] * back_[k - 1].transpose();
    const Matrix xa = acts_[k - 1] * acts_[k - 1].transpose();
    return (gb.array() * xa.array()).matrix();
  }

  Matrix gram() const override {
    Matrix g = layer_gram(depth() + 1);
    for (Index k = 1; k <= depth(); ++k) g += layer_gram(k);
    return g;
  }

 private:
  std::vector<Matrix> acts_;   // x^(0) .. x^(H), n rows each
  std::vector<Matrix> dact_;   // σ'(z^(k)), k = 1..H
  std::vector<Matrix> back_;   // ∂f/∂z^(k), k = 1..H
  std::vector<RowMajorMatrix> weights_;
  Vector head_;
  double scale_;
};

class DeepNet final : public Predictor {
 public:
  struct LayerSlice {
    Index offset;
    Index rows;
    Index cols;
    Index size() const { return rows * cols; }
  };

  DeepNet(Index input_dim, Index width, Index depth, Activation act = tanh_activation())
      : d_(input_dim), m_(width), depth_(depth), act_(std::move(act)), c_sigma_(c_sigma(act_)) {
    if (d_ <= 0 || m_ <= 0 || depth_ < 1) throw DimensionError("DeepNet: invalid shape");
  }

  Index input_dim() const override { return d_; }
  Index width() const { return m_; }
  Index depth() const { return depth_; }
  double normalization() const { return c_sigma_; }
  const Activation& activation() const { return act_; }

  Index num_params() const override { return m_ * d_ + (depth_ - 1) * m_ * m_ + m_; }

  LayerSlice layer(Index k) const {
    if (k < 1 || k > depth_ + 1) throw std::out_of_range("DeepNet: layer index out of range");
    if (k == 1) return {0, m_, d_};
    if (k == depth_ + 1) return {num_params() - m_, m_, 1};
    return {m_ * d_ + (k - 2) * m_ * m_, m_, m_};
  }

  /// W^(k) ~ N(0, 1) entrywise and a ~ N(0, 1).
  ParamVector init_params(std::mt19937_64& rng) const {
    std::normal_distribution<double> gauss(0.0, 1.0);
    ParamVector w(num_params());
    for (Index i = 0; i < w.size(); ++i) w(i) = gauss(rng);
    return w;
  }

  Vector predict(const ParamVector& w, const Matrix& inputs) const override {
    check_arguments(w, inputs);
    const double s = std::sqrt(c_sigma_ / static_cast<double>(m_));
    Matrix x = inputs;
    for (Index k = 1; k <= depth_; ++k) {
      const Matrix z = x * weight(w, k).transpose();
      x = s * z.unaryExpr(act_.value);
    }
    return x * w.segment(layer(depth_ + 1).offset, m_);
  }

  std::unique_ptr<DeepLocalModel> local(const ParamVector& w, const Matrix& inputs) const {
    check_arguments(w, inputs);
    const double s = std::sqrt(c_sigma_ / static_cast<double>(m_));
    std::vector<Matrix> acts{inputs};
    std::vector<Matrix> dact;
    std::vector<RowMajorMatrix> weights;
    for (Index k = 1; k <= depth_; ++k) {
      weights.emplace_back(weight(w, k));
      const Matrix z = acts.back() * weights.back().transpose();
      dact.push_back(z.unaryExpr(act_.first));
      acts.push_back(s * z.unaryExpr(act_.value));
    }
    Vector head = w.segment(layer(depth_ + 1).offset, m_);
    Vector out = acts.back() * head;

    std::vector<Matrix> back(static_cast<std::size_t>(depth_));
    Matrix upstream = Matrix::Ones(inputs.rows(), 1) * head.transpose();
    for (Index k = depth_; k >= 1; --k) {
      const auto idx = static_cast<std::size_t>(k - 1);
      back[idx] = s * (dact[idx].array() * upstream.array()).matrix();
      upstream = back[idx] * weights[idx];
    }
    return std::make_unique<DeepLocalModel>(std::move(out), std::move(acts), std::move(dact),
                                            std::move(back), std::move(weights), std::move(head),
                                            s);
  }

  std::unique_ptr<LocalModel> linearize(const ParamVector& w,
                                        const Matrix& inputs) const override {
    return local(w, inputs);
  }

  Eigen::Map<const RowMajorMatrix> weight(const ParamVector& w, Index k) const {
    const LayerSlice s = layer(k);
    return Eigen::Map<const RowMajorMatrix>(w.data() + s.offset, s.rows, s.cols);
  }

 private:
  Index d_;
  Index m_;
  Index depth_;
  Activation act_;
  double c_sigma_;
};

// ---------------------------------------------------------------------------
// Loss-dependent derivatives of ω ↦ R(α h(ω)).

/// ∇_ω ℓ(x_i, α h(ω)) = α ℓ'(α h_i, y_i) ∇_ω h_i.
inline Vector per_sample_loss_gradient(const Predictor& model, const ParamVector& w,
                                       const Dataset& data, const SquaredLoss& loss, double alpha,
                                       Index sample) {
  check_dataset(data);
  if (sample < 0 || sample >= data.size()) {
    throw std::out_of_range("sample index " + std::to_string(sample) + " outside dataset of " +
                            std::to_string(data.size()));
  }
  const auto local = model.linearize(w, data.inputs);
  Vector e = Vector::Zero(data.size());
  e(sample) = alpha * loss.derivative(alpha * local->outputs()(sample), data.targets(sample));
  return local->pullback(e);
}

/// ∇_ω R(α h(ω)) = α Dhᵀ ∇R(α h).
inline Vector parameter_risk_gradient(const Predictor& model, const ParamVector& w,
                                      const Dataset& data, double alpha) {
  check_dataset(data);
  const auto local = model.linearize(w, data.inputs);
  return alpha * local->pullback(risk_gradient(alpha * local->outputs(), data.targets));
}

inline constexpr Index kDefaultDenseCap = 2000;

/// ∇²_ω R(α h(ω)) = (α² ℓ''/n) Σ J_i J_iᵀ + (α/n) Σ ℓ'_i ∇²_ω h_i.
inline Matrix dense_parameter_hessian(const Predictor& model, const ParamVector& w,
                                      const Dataset& data, const SquaredLoss& loss, double alpha,
                                      Index cap = kDefaultDenseCap) {
  check_dataset(data);
  const Index p = model.num_params();
  if (p > cap) {
    throw CapacityError("dense Hessian needs p=" + std::to_string(p) + " > cap " +
                        std::to_string(cap));
  }
  const auto local = model.linearize(w, data.inputs);
  const double n = static_cast<double>(data.size());
  const Matrix j = local->jacobian();
  Vector slopes(data.size());
  for (Index i = 0; i < data.size(); ++i) {
    slopes(i) = loss.derivative(alpha * local->outputs()(i), data.targets(i));
  }
  Matrix h = (alpha * alpha * loss.curvature() / n) * (j.transpose() * j);
  h += (alpha / n) * model.weighted_output_hessian(w, data.inputs, slopes);
  return 0.5 * (h + h.transpose());
}

}  // namespace lazysgld
