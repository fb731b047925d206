#include "feddct/nn/ops.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <memory>

namespace feddct::nn::ops {

namespace {

void require_rank(const Tensor &t, std::size_t rank, const char *op)
{
    if (t.rank() != rank)
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + " input, got " +
                         shape_string(t.shape()));
}

void require_same(const Tensor &a, const Tensor &b, const char *op)
{
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

std::size_t pooled(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding, const char *op)
{
    if (kernel == 0 || stride == 0 || in + 2 * padding < kernel)
        throw ShapeError(std::string(op) + ": kernel " + std::to_string(kernel) + " does not fit input extent " +
                         std::to_string(in));
    return (in + 2 * padding - kernel) / stride + 1;
}

} // namespace

Var dense(Var x, Var weight, Var bias)
{
    const Tensor &xv = x.value();
    const Tensor &wv = weight.value();
    require_rank(xv, 2, "dense");
    require_rank(wv, 2, "dense");
    const std::size_t batch = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
    if (wv.dim(1) != in || bias.value().shape() != Shape{out})
        throw ShapeError("dense: input " + shape_string(xv.shape()) + ", weight " + shape_string(wv.shape()) +
                         ", bias " + shape_string(bias.value().shape()));
    Tensor y({batch, out});
    const Tensor &bv = bias.value();
    for (std::size_t b = 0; b < batch; ++b) {
        const double *xr = xv.data() + b * in;
        for (std::size_t o = 0; o < out; ++o) {
            const double *wr = wv.data() + o * in;
            double acc = 0.0;
            for (std::size_t i = 0; i < in; ++i)
                acc += xr[i] * wr[i];
            y[b * out + o] = acc + bv[o];
        }
    }
    return x.tape().record(std::move(y), {x, weight, bias}, [batch, in, out](const GradContext &c) {
        const Tensor &g = c.out_grad;
        const Tensor &xv = *c.in_values[0];
        const Tensor &wv = *c.in_values[1];
        if (Tensor *dx = c.in_grads[0]) {
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t o = 0; o < out; ++o) {
                    const double go = g[b * out + o];
                    for (std::size_t i = 0; i < in; ++i)
                        (*dx)[b * in + i] += go * wv[o * in + i];
                }
        }
        if (Tensor *dw = c.in_grads[1]) {
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t o = 0; o < out; ++o) {
                    const double go = g[b * out + o];
                    for (std::size_t i = 0; i < in; ++i)
                        (*dw)[o * in + i] += go * xv[b * in + i];
                }
        }
        if (Tensor *db = c.in_grads[2]) {
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t o = 0; o < out; ++o)
                    (*db)[o] += g[b * out + o];
        }
    });
}

Var conv2d(Var x, Var weight, Var bias, const Conv2dOptions &opt)
{
    const Tensor &xv = x.value();
    const Tensor &wv = weight.value();
    require_rank(xv, 4, "conv2d");
    require_rank(wv, 4, "conv2d");
    const std::size_t batch = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    const std::size_t cout = wv.dim(0), k = wv.dim(2), groups = opt.groups;
    if (groups == 0 || cin % groups || cout % groups || wv.dim(1) != cin / groups || wv.dim(3) != k ||
        bias.value().shape() != Shape{cout})
        throw ShapeError("conv2d: input " + shape_string(xv.shape()) + ", weight " + shape_string(wv.shape()) +
                         ", groups " + std::to_string(groups));
    const std::size_t ho = pooled(h, k, opt.stride, opt.padding, "conv2d");
    const std::size_t wo = pooled(w, k, opt.stride, opt.padding, "conv2d");
    const std::size_t cin_g = cin / groups, cout_g = cout / groups;
    const auto stride = static_cast<std::ptrdiff_t>(opt.stride);
    const auto pad = static_cast<std::ptrdiff_t>(opt.padding);

    // Visits every (output, input, weight) index triple in a fixed order.
    auto for_each_tap = [=](auto &&fn) {
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t co = 0; co < cout; ++co) {
                const std::size_t g = co / cout_g;
                for (std::size_t oy = 0; oy < ho; ++oy)
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                        const std::size_t oi = ((b * cout + co) * ho + oy) * wo + ox;
                        for (std::size_t ci = 0; ci < cin_g; ++ci) {
                            const std::size_t c_in = g * cin_g + ci;
                            for (std::size_t ky = 0; ky < k; ++ky) {
                                const auto iy = static_cast<std::ptrdiff_t>(oy) * stride - pad +
                                                static_cast<std::ptrdiff_t>(ky);
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h))
                                    continue;
                                for (std::size_t kx = 0; kx < k; ++kx) {
                                    const auto ix = static_cast<std::ptrdiff_t>(ox) * stride - pad +
                                                    static_cast<std::ptrdiff_t>(kx);
                                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w))
                                        continue;
                                    const std::size_t xi =
                                        ((b * cin + c_in) * h + static_cast<std::size_t>(iy)) * w +
                                        static_cast<std::size_t>(ix);
                                    const std::size_t wi = ((co * cin_g + ci) * k + ky) * k + kx;
                                    fn(oi, xi, wi);
                                }
                            }
                        }
                    }
            }
    };

    Tensor y({batch, cout, ho, wo});
    for_each_tap([&](std::size_t oi, std::size_t xi, std::size_t wi) { y[oi] += xv[xi] * wv[wi]; });
    const Tensor &bv = bias.value();
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] += bv[(i / (ho * wo)) % cout];

    return x.tape().record(std::move(y), {x, weight, bias}, [=](const GradContext &c) {
        const Tensor &g = c.out_grad;
        const Tensor &xv = *c.in_values[0];
        const Tensor &wv = *c.in_values[1];
        Tensor *dx = c.in_grads[0];
        Tensor *dw = c.in_grads[1];
        if (dx)
            for_each_tap([&](std::size_t oi, std::size_t xi, std::size_t wi) { (*dx)[xi] += g[oi] * wv[wi]; });
        if (dw)
            for_each_tap([&](std::size_t oi, std::size_t xi, std::size_t wi) { (*dw)[wi] += g[oi] * xv[xi]; });
        if (Tensor *db = c.in_grads[2])
            for (std::size_t i = 0; i < g.size(); ++i)
                (*db)[(i / (ho * wo)) % cout] += g[i];
    });
}

Var relu(Var x)
{
    Tensor y = x.value();
    for (auto &v : y.values())
        v = v > 0.0 ? v : 0.0;
    return x.tape().record(std::move(y), {x}, [](const GradContext &c) {
        const Tensor &xv = *c.in_values[0];
        Tensor &dx = *c.in_grads[0];
        for (std::size_t i = 0; i < xv.size(); ++i)
            if (xv[i] > 0.0)
                dx[i] += c.out_grad[i];
    });
}

std::vector<double> softmax(std::span<const double> logits)
{
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        s += out[i];
    }
    for (auto &v : out)
        v /= s;
    return out;
}

std::vector<double> log_softmax(std::span<const double> logits)
{
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (auto v : logits)
        s += std::exp(v - m);
    const double lse = m + std::log(s);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i)
        out[i] = logits[i] - lse;
    return out;
}

Var softmax_rows(Var x)
{
    const Tensor &xv = x.value();
    require_rank(xv, 2, "softmax");
    const std::size_t rows = xv.dim(0), cols = xv.dim(1);
    Tensor y(xv.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        auto row = softmax(xv.values().subspan(r * cols, cols));
        std::copy(row.begin(), row.end(), y.data() + r * cols);
    }
    return x.tape().record(std::move(y), {x}, [rows, cols](const GradContext &c) {
        const Tensor &y = c.out_value;
        const Tensor &g = c.out_grad;
        Tensor &dx = *c.in_grads[0];
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t j = 0; j < cols; ++j)
                dot += g[r * cols + j] * y[r * cols + j];
            for (std::size_t j = 0; j < cols; ++j)
                dx[r * cols + j] += y[r * cols + j] * (g[r * cols + j] - dot);
        }
    });
}

Var log_softmax_rows(Var x)
{
    const Tensor &xv = x.value();
    require_rank(xv, 2, "log_softmax");
    const std::size_t rows = xv.dim(0), cols = xv.dim(1);
    Tensor y(xv.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        auto row = log_softmax(xv.values().subspan(r * cols, cols));
        std::copy(row.begin(), row.end(), y.data() + r * cols);
    }
    return x.tape().record(std::move(y), {x}, [rows, cols](const GradContext &c) {
        const Tensor &y = c.out_value;
        const Tensor &g = c.out_grad;
        Tensor &dx = *c.in_grads[0];
        for (std::size_t r = 0; r < rows; ++r) {
            double total = 0.0;
            for (std::size_t j = 0; j < cols; ++j)
                total += g[r * cols + j];
            for (std::size_t j = 0; j < cols; ++j)
                dx[r * cols + j] += g[r * cols + j] - std::exp(y[r * cols + j]) * total;
        }
    });
}

Var dropout(Var x, double p, const RngStream &rng)
{
    if (!(p >= 0.0 && p < 1.0))
        throw std::invalid_argument("dropout probability must be in [0, 1), got " + std::to_string(p));
    const Tensor &xv = x.value();
    auto mask = std::make_shared<std::vector<double>>(xv.size());
    const double keep_scale = 1.0 / (1.0 - p);
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) {
        (*mask)[i] = rng.uniform_at(i) >= p ? keep_scale : 0.0;
        y[i] = xv[i] * (*mask)[i];
    }
    return x.tape().record(std::move(y), {x}, [mask](const GradContext &c) {
        Tensor &dx = *c.in_grads[0];
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx[i] += c.out_grad[i] * (*mask)[i];
    });
}

Var max_pool2d(Var x, std::size_t kernel, std::size_t stride)
{
    const Tensor &xv = x.value();
    require_rank(xv, 4, "max_pool2d");
    const std::size_t batch = xv.dim(0), ch = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    const std::size_t ho = pooled(h, kernel, stride, 0, "max_pool2d");
    const std::size_t wo = pooled(w, kernel, stride, 0, "max_pool2d");
    Tensor y({batch, ch, ho, wo});
    auto argmax = std::make_shared<std::vector<std::size_t>>(y.size());
    for (std::size_t bc = 0; bc < batch * ch; ++bc)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                std::size_t best = bc * h * w + (oy * stride) * w + ox * stride;
                for (std::size_t ky = 0; ky < kernel; ++ky)
                    for (std::size_t kx = 0; kx < kernel; ++kx) {
                        const std::size_t xi = bc * h * w + (oy * stride + ky) * w + ox * stride + kx;
                        if (xv[xi] > xv[best])
                            best = xi;
                    }
                const std::size_t oi = (bc * ho + oy) * wo + ox;
                y[oi] = xv[best];
                (*argmax)[oi] = best;
            }
    return x.tape().record(std::move(y), {x}, [argmax](const GradContext &c) {
        Tensor &dx = *c.in_grads[0];
        for (std::size_t i = 0; i < argmax->size(); ++i)
            dx[(*argmax)[i]] += c.out_grad[i];
    });
}

Var avg_pool2d(Var x, std::size_t kernel, std::size_t stride)
{
    const Tensor &xv = x.value();
    require_rank(xv, 4, "avg_pool2d");
    const std::size_t batch = xv.dim(0), ch = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    const std::size_t ho = pooled(h, kernel, stride, 0, "avg_pool2d");
    const std::size_t wo = pooled(w, kernel, stride, 0, "avg_pool2d");
    const double inv = 1.0 / static_cast<double>(kernel * kernel);
    Tensor y({batch, ch, ho, wo});
    for (std::size_t bc = 0; bc < batch * ch; ++bc)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                double acc = 0.0;
                for (std::size_t ky = 0; ky < kernel; ++ky)
                    for (std::size_t kx = 0; kx < kernel; ++kx)
                        acc += xv[bc * h * w + (oy * stride + ky) * w + ox * stride + kx];
                y[(bc * ho + oy) * wo + ox] = acc * inv;
            }
    return x.tape().record(std::move(y), {x}, [=](const GradContext &c) {
        Tensor &dx = *c.in_grads[0];
        for (std::size_t bc = 0; bc < batch * ch; ++bc)
            for (std::size_t oy = 0; oy < ho; ++oy)
                for (std::size_t ox = 0; ox < wo; ++ox) {
                    const double go = c.out_grad[(bc * ho + oy) * wo + ox] * inv;
                    for (std::size_t ky = 0; ky < kernel; ++ky)
                        for (std::size_t kx = 0; kx < kernel; ++kx)
                            dx[bc * h * w + (oy * stride + ky) * w + ox * stride + kx] += go;
                }
    });
}

Var global_avg_pool(Var x)
{
    const Tensor &xv = x.value();
    require_rank(xv, 4, "global_avg_pool");
    const std::size_t batch = xv.dim(0), ch = xv.dim(1), area = xv.dim(2) * xv.dim(3);
    const double inv = 1.0 / static_cast<double>(area);
    Tensor y({batch, ch});
    for (std::size_t bc = 0; bc < batch * ch; ++bc) {
        double acc = 0.0;
        for (std::size_t i = 0; i < area; ++i)
            acc += xv[bc * area + i];
        y[bc] = acc * inv;
    }
    return x.tape().record(std::move(y), {x}, [=](const GradContext &c) {
        Tensor &dx = *c.in_grads[0];
        for (std::size_t bc = 0; bc < batch * ch; ++bc) {
            const double go = c.out_grad[bc] * inv;
            for (std::size_t i = 0; i < area; ++i)
                dx[bc * area + i] += go;
        }
    });
}

Var reshape(Var x, Shape shape)
{
    Tensor y = x.value().reshaped(std::move(shape));
    return x.tape().record(std::move(y), {x}, [](const GradContext &c) {
        Tensor &dx = *c.in_grads[0];
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx[i] += c.out_grad[i];
    });
}

Var add(Var a, Var b)
{
    require_same(a.value(), b.value(), "add");
    Tensor y = a.value();
    y.add_inplace(b.value());
    return a.tape().record(std::move(y), {a, b}, [](const GradContext &c) {
        for (Tensor *d : c.in_grads)
            if (d)
                d->add_inplace(c.out_grad);
    });
}

Var sub(Var a, Var b)
{
    require_same(a.value(), b.value(), "sub");
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] -= b.value()[i];
    return a.tape().record(std::move(y), {a, b}, [](const GradContext &c) {
        if (Tensor *da = c.in_grads[0])
            da->add_inplace(c.out_grad);
        if (Tensor *db = c.in_grads[1])
            for (std::size_t i = 0; i < db->size(); ++i)
                (*db)[i] -= c.out_grad[i];
    });
}

Var scale(Var x, double factor)
{
    Tensor y = x.value();
    for (auto &v : y.values())
        v *= factor;
    return x.tape().record(std::move(y), {x}, [factor](const GradContext &c) {
        Tensor &dx = *c.in_grads[0];
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx[i] += factor * c.out_grad[i];
    });
}

Var sum_of(std::span<const Var> xs)
{
    if (xs.empty())
        throw ShapeError("sum_of: no inputs");
    Tensor y = xs.front().value();
    for (std::size_t k = 1; k < xs.size(); ++k) {
        require_same(xs[k].value(), y, "sum_of");
        y.add_inplace(xs[k].value());
    }
    return xs.front().tape().record(std::move(y), xs, [](const GradContext &c) {
        for (Tensor *d : c.in_grads)
            if (d)
                d->add_inplace(c.out_grad);
    });
}

Var sum_all(Var x)
{
    double acc = 0.0;
    for (auto v : x.value().values())
        acc += v;
    return x.tape().record(Tensor::scalar(acc), {x}, [](const GradContext &c) {
        Tensor &dx = *c.in_grads[0];
        const double g = c.out_grad[0];
        for (auto &v : dx.values())
            v += g;
    });
}

Var mean_all(Var x)
{
    const double inv = 1.0 / static_cast<double>(x.value().size());
    double acc = 0.0;
    for (auto v : x.value().values())
        acc += v;
    return x.tape().record(Tensor::scalar(acc * inv), {x}, [inv](const GradContext &c) {
        Tensor &dx = *c.in_grads[0];
        const double g = c.out_grad[0] * inv;
        for (auto &v : dx.values())
            v += g;
    });
}

Var row_sum(Var x)
{
    const Tensor &xv = x.value();
    require_rank(xv, 2, "row_sum");
    const std::size_t rows = xv.dim(0), cols = xv.dim(1);
    Tensor y({rows});
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j)
            acc += xv[r * cols + j];
        y[r] = acc;
    }
    return x.tape().record(std::move(y), {x}, [rows, cols](const GradContext &c) {
        Tensor &dx = *c.in_grads[0];
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < cols; ++j)
                dx[r * cols + j] += c.out_grad[r];
    });
}

Var pick(Var x, std::span<const int> index)
{
    const Tensor &xv = x.value();
    require_rank(xv, 2, "pick");
    const std::size_t rows = xv.dim(0), cols = xv.dim(1);
    if (index.size() != rows)
        throw ShapeError("pick: " + std::to_string(index.size()) + " indices for " + std::to_string(rows) + " rows");
    std::vector<std::size_t> at(rows);
    Tensor y({rows});
    for (std::size_t r = 0; r < rows; ++r) {
        if (index[r] < 0 || static_cast<std::size_t>(index[r]) >= cols)
            throw std::out_of_range("pick: index " + std::to_string(index[r]) + " out of range for " +
                                    std::to_string(cols) + " columns");
        at[r] = r * cols + static_cast<std::size_t>(index[r]);
        y[r] = xv[at[r]];
    }
    return x.tape().record(std::move(y), {x}, [at = std::move(at)](const GradContext &c) {
        Tensor &dx = *c.in_grads[0];
        for (std::size_t r = 0; r < at.size(); ++r)
            dx[at[r]] += c.out_grad[r];
    });
}

Var xlogx(Var x)
{
    Tensor y = x.value();
    for (auto &v : y.values()) {
        if (v < 0.0)
            throw std::domain_error("xlogx: negative input " + std::to_string(v));
        v = v > 0.0 ? v * std::log(v) : 0.0;
    }
    return x.tape().record(std::move(y), {x}, [](const GradContext &c) {
        const Tensor &xv = *c.in_values[0];
        Tensor &dx = *c.in_grads[0];
        for (std::size_t i = 0; i < xv.size(); ++i)
            dx[i] += c.out_grad[i] * (std::log(std::max(xv[i], DBL_MIN)) + 1.0);
    });
}

} // namespace feddct::nn::ops
