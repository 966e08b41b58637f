#pragma once

#include "lprnet/errors.hpp"
#include "lprnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

// Reverse-mode differentiation over rank-2 tensors, deliberately small: just
// the ops the network needs, no broadcasting beyond a leading batch axis.
// float for training, double for gradient checking. Any op that produces a
// NaN/Inf throws NumericFault naming the op, forward and backward alike.
namespace lprnet::ad {

struct Shape {
    int rows = 1;
    int cols = 1;

    int size() const { return rows * cols; }
    bool operator==(const Shape&) const = default;
    std::string str() const {
        return "[" + std::to_string(rows) + " x " + std::to_string(cols) + "]";
    }
};

template <typename T>
void check_finite(const std::vector<T>& v, const char* op) {
    for (const T x : v)
        if (!std::isfinite(double(x)))
            throw NumericFault(std::string("non-finite value produced by ") + op);
}

template <typename T>
class Tape {
public:
    struct Node {
        Shape shape;
        std::vector<T> values;
        std::vector<T> grad;  // allocated only when requires_grad
        bool requires_grad = false;
        const char* op = "input";
        std::function<void()> backward_fn;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    int add_input(const Shape& s, std::vector<T> values, bool requires_grad,
                  const char* name = "input") {
        if (int(values.size()) != s.size())
            throw ShapeError(std::string(name) + ": value count " +
                             std::to_string(values.size()) + " does not match " + s.str());
        check_finite(values, name);
        Node n;
        n.shape = s;
        n.values = std::move(values);
        n.requires_grad = requires_grad;
        n.op = name;
        if (requires_grad) n.grad.assign(n.values.size(), T(0));
        nodes_.push_back(std::move(n));
        return int(nodes_.size()) - 1;
    }

    // Uninitialized-value node; the op builder fills values then calls seal().
    int make_node(const Shape& s, bool requires_grad, const char* op) {
        Node n;
        n.shape = s;
        n.values.assign(std::size_t(s.size()), T(0));
        n.requires_grad = requires_grad;
        n.op = op;
        if (requires_grad) n.grad.assign(n.values.size(), T(0));
        nodes_.push_back(std::move(n));
        return int(nodes_.size()) - 1;
    }

    void seal(int id) { check_finite(nodes_[id].values, nodes_[id].op); }

    Node& at(int id) { return nodes_[std::size_t(id)]; }
    const Node& at(int id) const { return nodes_[std::size_t(id)]; }
    const Shape& shape(int id) const { return nodes_[std::size_t(id)].shape; }
    const std::vector<T>& values(int id) const { return nodes_[std::size_t(id)].values; }
    const std::vector<T>& grad(int id) const { return nodes_[std::size_t(id)].grad; }
    std::size_t size() const { return nodes_.size(); }

    void backward(int loss_id) {
        Node& loss = nodes_[std::size_t(loss_id)];
        if (!(loss.shape == Shape{1, 1}))
            throw std::invalid_argument("backward: loss must be scalar, got " + loss.shape.str());
        if (!loss.requires_grad)
            throw std::invalid_argument("backward: loss does not depend on any parameter");
        for (Node& n : nodes_)
            if (n.requires_grad) std::fill(n.grad.begin(), n.grad.end(), T(0));
        loss.grad[0] = T(1);
        for (int id = loss_id; id >= 0; --id) {
            Node& n = nodes_[std::size_t(id)];
            if (!n.requires_grad || !n.backward_fn) continue;
            check_finite(n.grad, n.op);
            n.backward_fn();
        }
    }

private:
    std::vector<Node> nodes_;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

}  // namespace detail

// c = a + b; b may be [1 x cols] and is then broadcast across rows.
template <typename T>
int add(Tape<T>& t, int a, int b) {
    const Shape sa = t.shape(a), sb = t.shape(b);
    const bool bcast = (sb.rows == 1 && sa.rows != 1);
    detail::require(sa.cols == sb.cols && (bcast || sa.rows == sb.rows),
                    "add: " + sa.str() + " vs " + sb.str());
    const bool rg = t.at(a).requires_grad || t.at(b).requires_grad;
    const int out = t.make_node(sa, rg, "add");
    {
        const auto& va = t.values(a);
        const auto& vb = t.values(b);
        auto& vo = t.at(out).values;
        for (int r = 0; r < sa.rows; ++r)
            for (int c = 0; c < sa.cols; ++c) {
                const std::size_t i = std::size_t(r) * sa.cols + c;
                vo[i] = va[i] + vb[bcast ? c : i];
            }
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, b, out, sa, bcast] {
            const auto& go = t.grad(out);
            if (t.at(a).requires_grad) {
                auto& ga = t.at(a).grad;
                for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
            }
            if (t.at(b).requires_grad) {
                auto& gb = t.at(b).grad;
                if (bcast) {
                    for (int r = 0; r < sa.rows; ++r)
                        for (int c = 0; c < sa.cols; ++c)
                            gb[c] += go[std::size_t(r) * sa.cols + c];
                } else {
                    for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
                }
            }
        };
    return out;
}

// c = a .* b (Hadamard); b may be [1 x cols], broadcast across rows.
template <typename T>
int mul(Tape<T>& t, int a, int b) {
    const Shape sa = t.shape(a), sb = t.shape(b);
    const bool bcast = (sb.rows == 1 && sa.rows != 1);
    detail::require(sa.cols == sb.cols && (bcast || sa.rows == sb.rows),
                    "mul: " + sa.str() + " vs " + sb.str());
    const bool rg = t.at(a).requires_grad || t.at(b).requires_grad;
    const int out = t.make_node(sa, rg, "mul");
    {
        const auto& va = t.values(a);
        const auto& vb = t.values(b);
        auto& vo = t.at(out).values;
        for (int r = 0; r < sa.rows; ++r)
            for (int c = 0; c < sa.cols; ++c) {
                const std::size_t i = std::size_t(r) * sa.cols + c;
                vo[i] = va[i] * vb[bcast ? c : i];
            }
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, b, out, sa, bcast] {
            const auto& go = t.grad(out);
            const auto& va = t.values(a);
            const auto& vb = t.values(b);
            if (t.at(a).requires_grad) {
                auto& ga = t.at(a).grad;
                for (int r = 0; r < sa.rows; ++r)
                    for (int c = 0; c < sa.cols; ++c) {
                        const std::size_t i = std::size_t(r) * sa.cols + c;
                        ga[i] += go[i] * vb[bcast ? c : i];
                    }
            }
            if (t.at(b).requires_grad) {
                auto& gb = t.at(b).grad;
                for (int r = 0; r < sa.rows; ++r)
                    for (int c = 0; c < sa.cols; ++c) {
                        const std::size_t i = std::size_t(r) * sa.cols + c;
                        gb[bcast ? c : i] += go[i] * va[i];
                    }
            }
        };
    return out;
}

template <typename T>
int scale(Tape<T>& t, int a, double factor) {
    const Shape s = t.shape(a);
    const bool rg = t.at(a).requires_grad;
    const int out = t.make_node(s, rg, "scale");
    {
        const auto& va = t.values(a);
        auto& vo = t.at(out).values;
        for (std::size_t i = 0; i < va.size(); ++i) vo[i] = va[i] * T(factor);
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, out, factor] {
            const auto& go = t.grad(out);
            auto& ga = t.at(a).grad;
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * T(factor);
        };
    return out;
}

template <typename T>
int matmul(Tape<T>& t, int a, int b) {
    const Shape sa = t.shape(a), sb = t.shape(b);
    detail::require(sa.cols == sb.rows, "matmul: " + sa.str() + " vs " + sb.str());
    const bool rg = t.at(a).requires_grad || t.at(b).requires_grad;
    const int out = t.make_node({sa.rows, sb.cols}, rg, "matmul");
    kernels::matmul(t.values(a).data(), t.values(b).data(), t.at(out).values.data(), sa.rows,
                    sa.cols, sb.cols);
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, b, out, sa, sb] {
            const auto& go = t.grad(out);
            if (t.at(a).requires_grad) {
                std::vector<T> da(t.at(a).grad.size());
                kernels::matmul_nt(go.data(), t.values(b).data(), da.data(), sa.rows, sb.cols,
                                   sa.cols);
                auto& ga = t.at(a).grad;
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += da[i];
            }
            if (t.at(b).requires_grad) {
                std::vector<T> db(t.at(b).grad.size());
                kernels::matmul_tn(t.values(a).data(), go.data(), db.data(), sa.rows, sa.cols,
                                   sb.cols);
                auto& gb = t.at(b).grad;
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += db[i];
            }
        };
    return out;
}

template <typename T>
int transpose(Tape<T>& t, int a) {
    const Shape s = t.shape(a);
    const bool rg = t.at(a).requires_grad;
    const int out = t.make_node({s.cols, s.rows}, rg, "transpose");
    {
        const auto& va = t.values(a);
        auto& vo = t.at(out).values;
        for (int r = 0; r < s.rows; ++r)
            for (int c = 0; c < s.cols; ++c)
                vo[std::size_t(c) * s.rows + r] = va[std::size_t(r) * s.cols + c];
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, out, s] {
            const auto& go = t.grad(out);
            auto& ga = t.at(a).grad;
            for (int r = 0; r < s.rows; ++r)
                for (int c = 0; c < s.cols; ++c)
                    ga[std::size_t(r) * s.cols + c] += go[std::size_t(c) * s.rows + r];
        };
    return out;
}

template <typename T>
int relu(Tape<T>& t, int a) {
    const Shape s = t.shape(a);
    const bool rg = t.at(a).requires_grad;
    const int out = t.make_node(s, rg, "relu");
    {
        const auto& va = t.values(a);
        auto& vo = t.at(out).values;
        for (std::size_t i = 0; i < va.size(); ++i) vo[i] = va[i] > T(0) ? va[i] : T(0);
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, out] {
            const auto& go = t.grad(out);
            const auto& va = t.values(a);
            auto& ga = t.at(a).grad;
            for (std::size_t i = 0; i < go.size(); ++i)
                if (va[i] > T(0)) ga[i] += go[i];
        };
    return out;
}

// exact erf form: x * Phi(x)
template <typename T>
int gelu(Tape<T>& t, int a) {
    const Shape s = t.shape(a);
    const bool rg = t.at(a).requires_grad;
    const int out = t.make_node(s, rg, "gelu");
    {
        const auto& va = t.values(a);
        auto& vo = t.at(out).values;
        for (std::size_t i = 0; i < va.size(); ++i) {
            const double x = double(va[i]);
            vo[i] = T(x * 0.5 * (1.0 + std::erf(x * M_SQRT1_2)));
        }
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, out] {
            const auto& go = t.grad(out);
            const auto& va = t.values(a);
            auto& ga = t.at(a).grad;
            for (std::size_t i = 0; i < go.size(); ++i) {
                const double x = double(va[i]);
                const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
                const double Phi = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
                ga[i] += go[i] * T(Phi + x * phi);
            }
        };
    return out;
}

// row-wise softmax, max-shifted for stability; each output row sums to 1
template <typename T>
int softmax(Tape<T>& t, int a) {
    const Shape s = t.shape(a);
    const bool rg = t.at(a).requires_grad;
    const int out = t.make_node(s, rg, "softmax");
    {
        const auto& va = t.values(a);
        auto& vo = t.at(out).values;
        for (int r = 0; r < s.rows; ++r) {
            const T* row = va.data() + std::size_t(r) * s.cols;
            T* orow = vo.data() + std::size_t(r) * s.cols;
            T mx = row[0];
            for (int c = 1; c < s.cols; ++c) mx = std::max(mx, row[c]);
            T denom = T(0);
            for (int c = 0; c < s.cols; ++c) {
                orow[c] = T(std::exp(double(row[c] - mx)));
                denom += orow[c];
            }
            for (int c = 0; c < s.cols; ++c) orow[c] /= denom;
        }
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, out, s] {
            const auto& go = t.grad(out);
            const auto& vo = t.values(out);
            auto& ga = t.at(a).grad;
            for (int r = 0; r < s.rows; ++r) {
                const std::size_t off = std::size_t(r) * s.cols;
                T dot = T(0);
                for (int c = 0; c < s.cols; ++c) dot += go[off + c] * vo[off + c];
                for (int c = 0; c < s.cols; ++c)
                    ga[off + c] += vo[off + c] * (go[off + c] - dot);
            }
        };
    return out;
}

// row-wise normalization to mean 0 / variance 1 (no affine part; compose with
// mul/add against [1 x cols] parameters for gain and bias)
template <typename T>
int layernorm(Tape<T>& t, int a, double eps = 1e-5) {
    const Shape s = t.shape(a);
    const bool rg = t.at(a).requires_grad;
    const int out = t.make_node(s, rg, "layernorm");
    std::vector<T> inv_sigma(std::size_t(s.rows));
    {
        const auto& va = t.values(a);
        auto& vo = t.at(out).values;
        for (int r = 0; r < s.rows; ++r) {
            const T* row = va.data() + std::size_t(r) * s.cols;
            T* orow = vo.data() + std::size_t(r) * s.cols;
            double mean = 0.0;
            for (int c = 0; c < s.cols; ++c) mean += double(row[c]);
            mean /= s.cols;
            double var = 0.0;
            for (int c = 0; c < s.cols; ++c) {
                const double d = double(row[c]) - mean;
                var += d * d;
            }
            var /= s.cols;
            const double inv = 1.0 / std::sqrt(var + eps);
            inv_sigma[std::size_t(r)] = T(inv);
            for (int c = 0; c < s.cols; ++c) orow[c] = T((double(row[c]) - mean) * inv);
        }
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, out, s, inv_sigma = std::move(inv_sigma)] {
            const auto& go = t.grad(out);
            const auto& vo = t.values(out);
            auto& ga = t.at(a).grad;
            for (int r = 0; r < s.rows; ++r) {
                const std::size_t off = std::size_t(r) * s.cols;
                double mean_g = 0.0, mean_gx = 0.0;
                for (int c = 0; c < s.cols; ++c) {
                    mean_g += double(go[off + c]);
                    mean_gx += double(go[off + c]) * double(vo[off + c]);
                }
                mean_g /= s.cols;
                mean_gx /= s.cols;
                const double inv = double(inv_sigma[std::size_t(r)]);
                for (int c = 0; c < s.cols; ++c)
                    ga[off + c] += T(inv * (double(go[off + c]) - mean_g -
                                            double(vo[off + c]) * mean_gx));
            }
        };
    return out;
}

// max over each run of `group` consecutive rows -> [rows/group x cols];
// group = rows pools the whole set. Ties take the first row, so the argmax
// (and the backward routing) is order-deterministic.
template <typename T>
int max_pool(Tape<T>& t, int a, int group) {
    const Shape s = t.shape(a);
    detail::require(group >= 1 && s.rows % group == 0,
                    "max_pool: group " + std::to_string(group) + " on " + s.str());
    const int out_rows = s.rows / group;
    const bool rg = t.at(a).requires_grad;
    const int out = t.make_node({out_rows, s.cols}, rg, "max_pool");
    std::vector<std::int32_t> argmax(std::size_t(out_rows) * s.cols);
    {
        const auto& va = t.values(a);
        auto& vo = t.at(out).values;
        for (int g = 0; g < out_rows; ++g)
            for (int c = 0; c < s.cols; ++c) {
                int best_r = g * group;
                T best = va[std::size_t(best_r) * s.cols + c];
                for (int r = g * group + 1; r < (g + 1) * group; ++r) {
                    const T v = va[std::size_t(r) * s.cols + c];
                    if (v > best) {
                        best = v;
                        best_r = r;
                    }
                }
                vo[std::size_t(g) * s.cols + c] = best;
                argmax[std::size_t(g) * s.cols + c] = best_r;
            }
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, out, s, out_rows, argmax = std::move(argmax)] {
            const auto& go = t.grad(out);
            auto& ga = t.at(a).grad;
            for (int g = 0; g < out_rows; ++g)
                for (int c = 0; c < s.cols; ++c) {
                    const std::size_t i = std::size_t(g) * s.cols + c;
                    ga[std::size_t(argmax[i]) * s.cols + c] += go[i];
                }
        };
    return out;
}

template <typename T>
int mean_pool(Tape<T>& t, int a, int group) {
    const Shape s = t.shape(a);
    detail::require(group >= 1 && s.rows % group == 0,
                    "mean_pool: group " + std::to_string(group) + " on " + s.str());
    const int out_rows = s.rows / group;
    const bool rg = t.at(a).requires_grad;
    const int out = t.make_node({out_rows, s.cols}, rg, "mean_pool");
    {
        const auto& va = t.values(a);
        auto& vo = t.at(out).values;
        for (int g = 0; g < out_rows; ++g)
            for (int c = 0; c < s.cols; ++c) {
                T acc = T(0);
                for (int r = g * group; r < (g + 1) * group; ++r)
                    acc += va[std::size_t(r) * s.cols + c];
                vo[std::size_t(g) * s.cols + c] = acc / T(group);
            }
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, out, s, out_rows, group] {
            const auto& go = t.grad(out);
            auto& ga = t.at(a).grad;
            for (int g = 0; g < out_rows; ++g)
                for (int c = 0; c < s.cols; ++c) {
                    const T share = go[std::size_t(g) * s.cols + c] / T(group);
                    for (int r = g * group; r < (g + 1) * group; ++r)
                        ga[std::size_t(r) * s.cols + c] += share;
                }
        };
    return out;
}

// stack along rows (axis 0, equal cols) or side by side (axis 1, equal rows)
template <typename T>
int concat(Tape<T>& t, const std::vector<int>& ids, int axis) {
    detail::require(!ids.empty() && (axis == 0 || axis == 1), "concat: bad inputs");
    Shape s0 = t.shape(ids[0]);
    bool rg = false;
    int total = 0;
    for (int id : ids) {
        const Shape s = t.shape(id);
        if (axis == 0)
            detail::require(s.cols == s0.cols, "concat: " + s0.str() + " vs " + s.str());
        else
            detail::require(s.rows == s0.rows, "concat: " + s0.str() + " vs " + s.str());
        total += (axis == 0) ? s.rows : s.cols;
        rg = rg || t.at(id).requires_grad;
    }
    const Shape so = (axis == 0) ? Shape{total, s0.cols} : Shape{s0.rows, total};
    const int out = t.make_node(so, rg, "concat");
    {
        auto& vo = t.at(out).values;
        if (axis == 0) {
            std::size_t off = 0;
            for (int id : ids) {
                const auto& v = t.values(id);
                std::copy(v.begin(), v.end(), vo.begin() + off);
                off += v.size();
            }
        } else {
            int coff = 0;
            for (int id : ids) {
                const Shape s = t.shape(id);
                const auto& v = t.values(id);
                for (int r = 0; r < s.rows; ++r)
                    std::copy(v.begin() + std::size_t(r) * s.cols,
                              v.begin() + std::size_t(r + 1) * s.cols,
                              vo.begin() + std::size_t(r) * so.cols + coff);
                coff += s.cols;
            }
        }
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, ids, out, so, axis] {
            const auto& go = t.grad(out);
            if (axis == 0) {
                std::size_t off = 0;
                for (int id : ids) {
                    auto& n = t.at(id);
                    if (n.requires_grad)
                        for (std::size_t i = 0; i < n.values.size(); ++i)
                            n.grad[i] += go[off + i];
                    off += n.values.size();
                }
            } else {
                int coff = 0;
                for (int id : ids) {
                    auto& n = t.at(id);
                    const Shape s = n.shape;
                    if (n.requires_grad)
                        for (int r = 0; r < s.rows; ++r)
                            for (int c = 0; c < s.cols; ++c)
                                n.grad[std::size_t(r) * s.cols + c] +=
                                    go[std::size_t(r) * so.cols + coff + c];
                    coff += s.cols;
                }
            }
        };
    return out;
}

// out[i] = a[indices[i]]; repeats allowed (backward accumulates)
template <typename T>
int gather_rows(Tape<T>& t, int a, std::vector<int> indices) {
    const Shape s = t.shape(a);
    for (int i : indices)
        detail::require(i >= 0 && i < s.rows,
                        "gather_rows: index " + std::to_string(i) + " outside " + s.str());
    const bool rg = t.at(a).requires_grad;
    const int out = t.make_node({int(indices.size()), s.cols}, rg, "gather_rows");
    {
        const auto& va = t.values(a);
        auto& vo = t.at(out).values;
        for (std::size_t i = 0; i < indices.size(); ++i)
            std::copy(va.begin() + std::size_t(indices[i]) * s.cols,
                      va.begin() + std::size_t(indices[i] + 1) * s.cols,
                      vo.begin() + i * s.cols);
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, out, s, indices = std::move(indices)] {
            const auto& go = t.grad(out);
            auto& ga = t.at(a).grad;
            for (std::size_t i = 0; i < indices.size(); ++i)
                for (int c = 0; c < s.cols; ++c)
                    ga[std::size_t(indices[i]) * s.cols + c] += go[i * std::size_t(s.cols) + c];
        };
    return out;
}

// column range [c0, c1), used to split attention heads
template <typename T>
int slice_cols(Tape<T>& t, int a, int c0, int c1) {
    const Shape s = t.shape(a);
    detail::require(0 <= c0 && c0 < c1 && c1 <= s.cols,
                    "slice_cols: [" + std::to_string(c0) + ", " + std::to_string(c1) + ") of " +
                        s.str());
    const int w = c1 - c0;
    const bool rg = t.at(a).requires_grad;
    const int out = t.make_node({s.rows, w}, rg, "slice_cols");
    {
        const auto& va = t.values(a);
        auto& vo = t.at(out).values;
        for (int r = 0; r < s.rows; ++r)
            std::copy(va.begin() + std::size_t(r) * s.cols + c0,
                      va.begin() + std::size_t(r) * s.cols + c1, vo.begin() + std::size_t(r) * w);
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, out, s, c0, w] {
            const auto& go = t.grad(out);
            auto& ga = t.at(a).grad;
            for (int r = 0; r < s.rows; ++r)
                for (int c = 0; c < w; ++c)
                    ga[std::size_t(r) * s.cols + c0 + c] += go[std::size_t(r) * w + c];
        };
    return out;
}

// same element count, new shape; values kept in row-major order
template <typename T>
int reshape(Tape<T>& t, int a, const Shape& s) {
    detail::require(s.size() == t.shape(a).size(),
                    "reshape: " + t.shape(a).str() + " to " + s.str());
    const bool rg = t.at(a).requires_grad;
    const int out = t.make_node(s, rg, "reshape");
    t.at(out).values = t.values(a);
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, out] {
            const auto& go = t.grad(out);
            auto& ga = t.at(a).grad;
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        };
    return out;
}

template <typename T>
int sum(Tape<T>& t, int a) {
    const bool rg = t.at(a).requires_grad;
    const int out = t.make_node({1, 1}, rg, "sum");
    {
        const auto& va = t.values(a);
        T acc = T(0);
        for (const T v : va) acc += v;
        t.at(out).values[0] = acc;
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, a, out] {
            const T g = t.grad(out)[0];
            auto& ga = t.at(a).grad;
            for (auto& v : ga) v += g;
        };
    return out;
}

// Symmetric chamfer-L2 between predicted and reference points, grouped in
// runs of `group` rows of (x, y, z); the scalar result averages both
// directions within each group and then averages over groups. Nearest
// neighbors tie-break to the lowest index.
template <typename T>
int chamfer_grouped(Tape<T>& t, int pred, const std::vector<T>& target, int group) {
    const Shape s = t.shape(pred);
    detail::require(s.cols == 3 && group >= 1 && s.rows % group == 0,
                    "chamfer_grouped: group " + std::to_string(group) + " on " + s.str());
    detail::require(target.size() == t.values(pred).size(),
                    "chamfer_grouped: target size " + std::to_string(target.size()) + " vs " +
                        s.str());
    const int groups = s.rows / group;
    const bool rg = t.at(pred).requires_grad;
    const int out = t.make_node({1, 1}, rg, "chamfer");

    // nearest-match indices both ways, reused by the backward pass
    std::vector<std::int32_t> near_tgt(std::size_t(s.rows));   // per pred row
    std::vector<std::int32_t> near_pred(std::size_t(s.rows));  // per target row
    {
        const auto& vp = t.values(pred);
        double total = 0.0;
        for (int g = 0; g < groups; ++g) {
            const int base = g * group;
            double fwd = 0.0, bwd = 0.0;
            for (int i = 0; i < group; ++i) {
                const T* p = vp.data() + std::size_t(base + i) * 3;
                double best = std::numeric_limits<double>::infinity();
                int best_j = 0;
                for (int j = 0; j < group; ++j) {
                    const T* q = target.data() + std::size_t(base + j) * 3;
                    const double dx = double(p[0] - q[0]);
                    const double dy = double(p[1] - q[1]);
                    const double dz = double(p[2] - q[2]);
                    const double d2 = dx * dx + dy * dy + dz * dz;
                    if (d2 < best) {
                        best = d2;
                        best_j = j;
                    }
                }
                near_tgt[std::size_t(base + i)] = base + best_j;
                fwd += best;
            }
            for (int j = 0; j < group; ++j) {
                const T* q = target.data() + std::size_t(base + j) * 3;
                double best = std::numeric_limits<double>::infinity();
                int best_i = 0;
                for (int i = 0; i < group; ++i) {
                    const T* p = vp.data() + std::size_t(base + i) * 3;
                    const double dx = double(p[0] - q[0]);
                    const double dy = double(p[1] - q[1]);
                    const double dz = double(p[2] - q[2]);
                    const double d2 = dx * dx + dy * dy + dz * dz;
                    if (d2 < best) {
                        best = d2;
                        best_i = i;
                    }
                }
                near_pred[std::size_t(base + j)] = base + best_i;
                bwd += best;
            }
            total += (fwd + bwd) / group;
        }
        t.at(out).values[0] = T(total / groups);
    }
    t.seal(out);
    if (rg)
        t.at(out).backward_fn = [&t, pred, out, s, group, groups, target,
                                 near_tgt = std::move(near_tgt),
                                 near_pred = std::move(near_pred)] {
            const T g0 = t.grad(out)[0];
            const auto& vp = t.values(pred);
            auto& gp = t.at(pred).grad;
            const T w = g0 / (T(group) * T(groups));
            for (int i = 0; i < s.rows; ++i) {
                const T* p = vp.data() + std::size_t(i) * 3;
                const T* q = target.data() + std::size_t(near_tgt[std::size_t(i)]) * 3;
                for (int c = 0; c < 3; ++c)
                    gp[std::size_t(i) * 3 + c] += w * T(2) * (p[c] - q[c]);
            }
            for (int j = 0; j < s.rows; ++j) {
                const int i = near_pred[std::size_t(j)];
                const T* p = vp.data() + std::size_t(i) * 3;
                const T* q = target.data() + std::size_t(j) * 3;
                for (int c = 0; c < 3; ++c)
                    gp[std::size_t(i) * 3 + c] += w * T(2) * (p[c] - q[c]);
            }
        };
    return out;
}

// ---------------------------------------------------------------------------
// parameters and the optimizer

template <typename T>
struct Param {
    std::string name;
    Shape shape;
    std::vector<T> value;
};

// Decoupled-weight-decay Adam over a parameter list, moments held here so the
// whole thing can be checkpointed and resumed.
template <typename T>
struct OptimizerState {
    std::vector<std::vector<T>> m, v;  // parallel to the parameter list
    std::int64_t step = 0;
    double base_lr = 1e-3;
    double weight_decay = 0.01;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

template <typename T>
OptimizerState<T> init_optimizer(const std::vector<Param<T>>& params, double base_lr,
                                 double weight_decay) {
    OptimizerState<T> st;
    st.base_lr = base_lr;
    st.weight_decay = weight_decay;
    st.m.resize(params.size());
    st.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i].assign(params[i].value.size(), T(0));
        st.v[i].assign(params[i].value.size(), T(0));
    }
    return st;
}

template <typename T>
void adamw_step(OptimizerState<T>& st, std::vector<Param<T>>& params,
                const std::vector<std::vector<T>>& grads, double lr) {
    if (grads.size() != params.size())
        throw ShapeError("adamw_step: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
    st.step += 1;
    const double c1 = 1.0 - std::pow(st.beta1, double(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, double(st.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& value = params[p].value;
        if (grads[p].size() != value.size())
            throw ShapeError("adamw_step: gradient shape mismatch for " + params[p].name);
        auto& m = st.m[p];
        auto& v = st.v[p];
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = double(grads[p][i]);
            const double mi = st.beta1 * double(m[i]) + (1.0 - st.beta1) * g;
            const double vi = st.beta2 * double(v[i]) + (1.0 - st.beta2) * g * g;
            m[i] = T(mi);
            v[i] = T(vi);
            const double mhat = mi / c1;
            const double vhat = vi / c2;
            value[i] = T(double(value[i]) - lr * (mhat / (std::sqrt(vhat) + st.eps) +
                                                  st.weight_decay * double(value[i])));
        }
    }
}

// half-cosine from base_lr down to the floor; floor keeps late steps active
inline double cosine_lr(std::int64_t step, std::int64_t total_steps, double base_lr,
                        double floor = 1e-6) {
    if (total_steps <= 0 || step >= total_steps) return floor;
    const double raw = base_lr * 0.5 * (1.0 + std::cos(M_PI * double(step) / double(total_steps)));
    return std::max(raw, floor);
}

}  // namespace lprnet::ad
