#include <cmath>

#include "common.hpp"
#include "fluxlab/ops.hpp"

namespace fluxlab {

using detail::ConstMatMap;
using detail::grad_of;
using detail::MatMap;
using detail::out_grad;
using detail::RowMat;

namespace {

struct BatchPairs {
    Shape out_batch;
    std::vector<std::size_t> ia, ib; // matrix index into a / b for each output batch entry
};

BatchPairs broadcast_batches(const Shape& a, const Shape& b) {
    const std::size_t ra = a.size() - 2, rb = b.size() - 2;
    const std::size_t rank = std::max(ra, rb);
    std::vector<std::size_t> ea(rank, 1), eb(rank, 1);
    for (std::size_t i = 0; i < ra; ++i) ea[rank - ra + i] = a[i];
    for (std::size_t i = 0; i < rb; ++i) eb[rank - rb + i] = b[i];
    BatchPairs bp;
    bp.out_batch.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        if (ea[i] != eb[i] && ea[i] != 1 && eb[i] != 1) {
            throw ShapeError("matmul: batch dims of " + to_string(a) + " and " + to_string(b) +
                             " do not broadcast");
        }
        bp.out_batch[i] = std::max(ea[i], eb[i]);
    }
    const std::size_t n = numel(bp.out_batch);
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t o = 0; o < n; ++o) {
        std::size_t fa = 0, fb = 0;
        for (std::size_t ax = 0; ax < rank; ++ax) {
            fa = fa * ea[ax] + (ea[ax] == 1 ? 0 : idx[ax]);
            fb = fb * eb[ax] + (eb[ax] == 1 ? 0 : idx[ax]);
        }
        bp.ia.push_back(fa);
        bp.ib.push_back(fb);
        for (std::size_t ax = rank; ax-- > 0;) {
            if (++idx[ax] < bp.out_batch[ax]) break;
            idx[ax] = 0;
        }
    }
    return bp;
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() < 2 || sb.size() < 2 || sa[sa.size() - 1] != sb[sb.size() - 2]) {
        throw ShapeError("matmul: incompatible shapes " + to_string(sa) + " and " + to_string(sb));
    }
    const std::size_t m = sa[sa.size() - 2];
    const std::size_t k = sa[sa.size() - 1];
    const std::size_t n = sb[sb.size() - 1];
    const auto lm = static_cast<Eigen::Index>(m), lk = static_cast<Eigen::Index>(k),
               ln = static_cast<Eigen::Index>(n);

    if (sb.size() == 2) {
        // Fold all of a's batch dims into the row dimension: a single GEMM.
        const auto rows = static_cast<Eigen::Index>(a.numel() / k);
        Shape out = sa;
        out.back() = n;
        Buffer data(static_cast<std::size_t>(rows) * n);
        MatMap(data.data(), rows, ln).noalias() =
            ConstMatMap(a.data().data(), rows, lk) * ConstMatMap(b.data().data(), lk, ln);
        Tensor result = make_result(std::move(out), std::move(data));
        Tape::current().record("matmul", {a, b}, result, [=]() {
            ConstMatMap g(out_grad(result), rows, ln);
            if (double* ga = grad_of(a)) {
                MatMap(ga, rows, lk).noalias() += g * ConstMatMap(b.data().data(), lk, ln).transpose();
            }
            if (double* gb = grad_of(b)) {
                MatMap(gb, lk, ln).noalias() += ConstMatMap(a.data().data(), rows, lk).transpose() * g;
            }
        });
        return result;
    }

    auto bp = std::make_shared<BatchPairs>(broadcast_batches(sa, sb));
    Shape out = bp->out_batch;
    out.push_back(m);
    out.push_back(n);
    const std::size_t batches = bp->ia.size();
    Buffer data(batches * m * n);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < batches; ++i) {
        MatMap(data.data() + i * m * n, lm, ln).noalias() =
            ConstMatMap(pa + bp->ia[i] * m * k, lm, lk) * ConstMatMap(pb + bp->ib[i] * k * n, lk, ln);
    }
    Tensor result = make_result(std::move(out), std::move(data));
    Tape::current().record("matmul_batched", {a, b}, result, [=]() {
        const double* g = out_grad(result);
        double* ga = grad_of(a);
        double* gb = grad_of(b);
        const double* xa = a.data().data();
        const double* xb = b.data().data();
        for (std::size_t i = 0; i < batches; ++i) {
            ConstMatMap gi(g + i * m * n, lm, ln);
            if (ga) {
                MatMap(ga + bp->ia[i] * m * k, lm, lk).noalias() +=
                    gi * ConstMatMap(xb + bp->ib[i] * k * n, lk, ln).transpose();
            }
            if (gb) {
                MatMap(gb + bp->ib[i] * k * n, lk, ln).noalias() +=
                    ConstMatMap(xa + bp->ia[i] * m * k, lm, lk).transpose() * gi;
            }
        }
    });
    return result;
}

Tensor softmax_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    const Shape& s = q.shape();
    if (s.size() < 2 || k.shape() != s || v.shape() != s) {
        throw ShapeError("softmax_attention: q " + to_string(s) + ", k " + to_string(k.shape()) +
                         ", v " + to_string(v.shape()) + " must match with rank >= 2");
    }
    const std::size_t p = s[s.size() - 2];
    const std::size_t e = s[s.size() - 1];
    const std::size_t groups = q.numel() / (p * e);
    const auto lp = static_cast<Eigen::Index>(p), le = static_cast<Eigen::Index>(e);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(e));

    auto weights = std::make_shared<Buffer>(groups * p * p);
    Buffer data(q.numel());
    for (std::size_t gi = 0; gi < groups; ++gi) {
        const std::size_t off = gi * p * e;
        MatMap att(weights->data() + gi * p * p, lp, lp);
        att.noalias() = ConstMatMap(q.data().data() + off, lp, le) *
                        ConstMatMap(k.data().data() + off, lp, le).transpose();
        att *= inv_sqrt;
        for (Eigen::Index r = 0; r < lp; ++r) {
            const double mx = att.row(r).maxCoeff();
            att.row(r) = (att.row(r).array() - mx).exp();
            att.row(r) /= att.row(r).sum();
        }
        MatMap(data.data() + off, lp, le).noalias() = att * ConstMatMap(v.data().data() + off, lp, le);
    }
    Tensor result = make_result(s, std::move(data));
    Tape::current().record("softmax_attention", {q, k, v}, result, [=]() {
        const double* g = out_grad(result);
        double* gq = grad_of(q);
        double* gk = grad_of(k);
        double* gv = grad_of(v);
        RowMat d_att(lp, lp);
        for (std::size_t gi = 0; gi < groups; ++gi) {
            const std::size_t off = gi * p * e;
            ConstMatMap att(weights->data() + gi * p * p, lp, lp);
            ConstMatMap go(g + off, lp, le);
            if (gv) MatMap(gv + off, lp, le).noalias() += att.transpose() * go;
            if (!gq && !gk) continue;
            d_att.noalias() = go * ConstMatMap(v.data().data() + off, lp, le).transpose();
            // softmax adjoint, row by row
            for (Eigen::Index r = 0; r < lp; ++r) {
                const double dot = att.row(r).dot(d_att.row(r));
                d_att.row(r) = att.row(r).cwiseProduct((d_att.row(r).array() - dot).matrix());
            }
            d_att *= inv_sqrt;
            if (gq) {
                MatMap(gq + off, lp, le).noalias() += d_att * ConstMatMap(k.data().data() + off, lp, le);
            }
            if (gk) {
                MatMap(gk + off, lp, le).noalias() +=
                    d_att.transpose() * ConstMatMap(q.data().data() + off, lp, le);
            }
        }
    });
    return result;
}

} // namespace fluxlab
