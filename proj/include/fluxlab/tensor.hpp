#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fluxlab {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Cache-line aligned allocator. Eigen kernels peel leading elements by
/// pointer alignment, so unaligned storage makes rounding depend on where the
/// heap placed a buffer.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

namespace detail {

struct TensorImpl {
    Shape shape;
    Buffer data;
    Buffer grad; // empty until a gradient is accumulated
    bool requires_grad = false;
    std::optional<std::size_t> node_id;

    Buffer& grad_buffer() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

} // namespace detail

/// Dense row-major float64 array with optional reverse-mode gradient tracking.
///
/// Tensor is a shared handle: copies alias the same storage. Ops never mutate
/// their inputs; leaf data may be edited in place through mutable_data() (used by
/// optimizers and finite-difference checks).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const noexcept { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim() const { return shape().size(); }
    /// Extent of `axis`; negative axes count from the back.
    std::size_t size(int axis) const;
    std::size_t numel() const { return data().size(); }

    std::span<const double> data() const;
    std::span<double> mutable_data();
    std::vector<double> to_vector() const;

    /// Gradient buffer; empty span when no gradient has been accumulated.
    std::span<const double> grad() const;
    bool has_grad() const;
    void zero_grad();

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    std::optional<std::size_t> node_id() const;

    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    /// Same values, fresh storage, not attached to any tape.
    Tensor detach() const;

    detail::TensorImpl& impl() const;
    const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;

    friend class Tape;
    friend Tensor make_result(Shape shape, Buffer data);
};

/// Build a result tensor for an op; used by op implementations.
Tensor make_result(Shape shape, Buffer data);

/// Append-only record of differentiable ops executed on one thread.
///
/// Every op whose inputs require gradients appends a node holding its inputs,
/// output and an adjoint closure. backward() walks the nodes once in reverse
/// insertion order, which is a valid reverse topological order because a node
/// can only consume tensors created before it.
class Tape {
public:
    using Backward = std::function<void()>;

    /// Tape bound to the calling thread.
    static Tape& current();

    std::size_t size() const noexcept { return nodes_.size(); }

    /// Seeds d(loss)/d(loss) = 1, propagates adjoints and clears the tape.
    void backward(const Tensor& loss);
    void clear();

    /// Registers `output` as produced by `op` from `inputs`. Returns false (and
    /// records nothing) when no input requires a gradient or grad mode is off.
    bool record(const char* op, std::initializer_list<Tensor> inputs, const Tensor& output,
                Backward backward);
    bool record(const char* op, const std::vector<Tensor>& inputs, const Tensor& output,
                Backward backward);

    /// Op names in insertion order; for diagnostics and tests.
    std::vector<std::string> op_names() const;

private:
    struct Node {
        const char* op;
        std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
        std::shared_ptr<detail::TensorImpl> output;
        Backward backward;
    };
    std::vector<Node> nodes_;
};

bool grad_enabled();

/// Disables tape recording on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

} // namespace fluxlab
