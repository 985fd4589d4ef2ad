#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace elda {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Thrown whenever operand shapes are incompatible; the message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until the first gradient arrives
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into the parents' grad buffers.
  std::function<void(Node&)> backward;

  void ensure_grad();
};

}  // namespace detail

/// Handle to a node of the reverse-mode graph.
///
/// Copies share the underlying node, so a parameter tensor held by the model
/// and the same tensor used inside a forward pass are one object. Values are
/// float64 in row-major order.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::uint64_t id() const;

  std::span<const double> values() const;
  /// Direct write access. Only meaningful for leaves (inputs and parameters);
  /// writing into an interior node does not invalidate recorded closures.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t flat) const { return values()[flat]; }

  bool requires_grad() const;
  bool has_grad() const;
  /// Gradient buffer; all zeros if nothing has been accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Leaf copy of the values that never propagates gradients.
  Tensor detach() const;
  /// Deep copy; keeps requires_grad, drops graph history and grad.
  Tensor clone() const;

  /// Seeds d(this)/d(this) = 1 and propagates to every reachable node.
  /// Gradients accumulate: calling twice without zero_grad doubles them.
  void backward() const;

  /// Internal: builds a non-leaf node. Records parents only when gradient
  /// recording is enabled and some parent requires grad.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward);

  detail::Node& node() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// True unless a NoGradGuard is alive on this thread.
bool grad_enabled();

/// Disables graph recording for its lifetime (forward passes that only feed
/// detached consumers, such as pseudo-label generation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace elda
