#include "fluxlab/tensor.hpp"

#include <cassert>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fluxlab/error.hpp"

namespace fluxlab {

std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->data.assign(fluxlab::numel(shape), value);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (fluxlab::numel(shape) != data.size()) {
        throw ShapeError("from_data: shape " + to_string(shape) + " holds " +
                         std::to_string(fluxlab::numel(shape)) + " values, got " +
                         std::to_string(data.size()));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data.assign(data.begin(), data.end());
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from_data({}, {value}); }

Tensor make_result(Shape shape, Buffer data) {
    assert(numel(shape) == data.size());
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    return Tensor(std::move(impl));
}

detail::TensorImpl& Tensor::impl() const {
    if (!impl_) throw Error("use of an undefined tensor");
    return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::size_t Tensor::size(int axis) const {
    const auto& s = shape();
    const int n = static_cast<int>(s.size());
    const int a = axis < 0 ? axis + n : axis;
    if (a < 0 || a >= n) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(s));
    }
    return s[static_cast<std::size_t>(a)];
}

std::span<const double> Tensor::data() const { return impl().data; }
std::span<double> Tensor::mutable_data() { return impl().data; }
std::vector<double> Tensor::to_vector() const { return {impl().data.begin(), impl().data.end()}; }

std::span<const double> Tensor::grad() const { return impl().grad; }
bool Tensor::has_grad() const { return !impl().grad.empty(); }
void Tensor::zero_grad() { impl().grad.clear(); }

bool Tensor::requires_grad() const { return impl().requires_grad; }
void Tensor::set_requires_grad(bool flag) { impl().requires_grad = flag; }
std::optional<std::size_t> Tensor::node_id() const { return impl().node_id; }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
    return data()[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    const auto& s = shape();
    if (index.size() != s.size()) {
        throw ShapeError("at(): rank mismatch for shape " + to_string(s));
    }
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= s[axis]) throw ShapeError("at(): index out of range for shape " + to_string(s));
        flat = flat * s[axis] + i;
        ++axis;
    }
    return data()[flat];
}

Tensor Tensor::detach() const { return make_result(shape(), impl().data); }

namespace {

thread_local bool t_grad_enabled = true;

#ifndef NDEBUG
bool all_finite(const Buffer& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}
#endif

} // namespace

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tape& Tape::current() {
    thread_local Tape tape;
    return tape;
}

bool Tape::record(const char* op, std::initializer_list<Tensor> inputs, const Tensor& output,
                  Backward backward) {
    return record(op, std::vector<Tensor>(inputs), output, std::move(backward));
}

bool Tape::record(const char* op, const std::vector<Tensor>& inputs, const Tensor& output,
                  Backward backward) {
    if (!t_grad_enabled) return false;
    bool any = false;
    for (const auto& t : inputs) any = any || t.requires_grad();
    if (!any) return false;

#ifndef NDEBUG
    bool inputs_finite = true;
    for (const auto& t : inputs) inputs_finite = inputs_finite && all_finite(t.impl().data);
    assert((!inputs_finite || all_finite(output.impl().data)) && "non-finite op output");
#endif

    Node node{op, {}, output.impl_ptr(), std::move(backward)};
    node.inputs.reserve(inputs.size());
    for (const auto& t : inputs) node.inputs.push_back(t.impl_ptr());
    output.impl().requires_grad = true;
    output.impl().node_id = nodes_.size();
    nodes_.push_back(std::move(node));
    return true;
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ShapeError("backward() requires a scalar loss, got shape " + to_string(loss.shape()));
    }
    if (!loss.requires_grad()) {
        clear();
        return;
    }
    loss.impl().grad_buffer()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output->grad.empty()) continue; // no adjoint reached this node
        it->backward();
    }
    clear();
}

void Tape::clear() {
    for (auto& node : nodes_) node.output->node_id.reset();
    nodes_.clear();
}

std::vector<std::string> Tape::op_names() const {
    std::vector<std::string> names;
    names.reserve(nodes_.size());
    for (const auto& n : nodes_) names.emplace_back(n.op);
    return names;
}

} // namespace fluxlab
