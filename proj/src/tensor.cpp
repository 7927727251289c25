#include "clair/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace clair {

namespace {

size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
        n *= static_cast<size_t>(d);
    }
    return n;
}

void set_needs_grad(TensorNode& node) {
    node.needs_grad = node.requires_grad;
    for (const auto& p : node.parents) {
        if (p->needs_grad) node.needs_grad = true;
    }
}

// Pin BLAS to one thread before the first gemm; small matrices plus
// determinism requirements make threaded BLAS a loss here.
void init_blas_once() {
    static const bool done = [] {
        setenv("OPENBLAS_NUM_THREADS", "1", 0);
        setenv("OMP_NUM_THREADS", "1", 0);
        return true;
    }();
    (void)done;
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor make_tensor(std::vector<int> shape, bool requires_grad) {
    auto t = std::make_shared<TensorNode>();
    size_t n = shape_numel(shape);
    t->shape = std::move(shape);
    t->data = std::make_shared<std::vector<double>>(n, 0.0);
    t->requires_grad = requires_grad;
    t->needs_grad = requires_grad;
    return t;
}

Tensor make_tensor(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    size_t n = shape_numel(shape);
    if (values.size() != n)
        throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                    " does not match shape " + shape_str(shape));
    auto t = std::make_shared<TensorNode>();
    t->shape = std::move(shape);
    t->data = std::make_shared<std::vector<double>>(std::move(values));
    t->requires_grad = requires_grad;
    t->needs_grad = requires_grad;
    return t;
}

Tensor randn_tensor(std::vector<int> shape, Rng& rng, double scale, bool requires_grad) {
    Tensor t = make_tensor(std::move(shape), requires_grad);
    for (double& v : *t->data) v = rng.gaussian() * scale;
    return t;
}

Tensor leaf_view(const Tensor& param) {
    auto t = std::make_shared<TensorNode>();
    t->shape = param->shape;
    t->data = param->data;  // aliased
    t->requires_grad = param->requires_grad;
    t->needs_grad = param->needs_grad;
    return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2 || a->cols() != b->rows())
        throw std::invalid_argument("matmul shape mismatch: " + shape_str(a->shape) + " x " +
                                    shape_str(b->shape));
    init_blas_once();
    int m = a->rows(), k = a->cols(), n = b->cols();
    Tensor out = make_tensor({m, n});
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, 1.0, a->data->data(), k,
                b->data->data(), n, 0.0, out->data->data(), n);
    out->parents = {a, b};
    set_needs_grad(*out);
    if (out->needs_grad) {
        out->backprop = [m, n, k](TensorNode& o) {
            const Tensor& pa = o.parents[0];
            const Tensor& pb = o.parents[1];
            if (pa->needs_grad) {
                pa->ensure_grad();
                // dA += dC * B^T
                cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, k, n, 1.0, o.grad.data(),
                            n, pb->data->data(), n, 1.0, pa->grad.data(), k);
            }
            if (pb->needs_grad) {
                pb->ensure_grad();
                // dB += A^T * dC
                cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, k, n, m, 1.0,
                            pa->data->data(), k, o.grad.data(), n, 1.0, pb->grad.data(), n);
            }
        };
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    int m = a->rows(), n = a->cols();
    Tensor out = make_tensor({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->at(j, i) = a->at(i, j);
    out->parents = {a};
    set_needs_grad(*out);
    if (out->needs_grad) {
        out->backprop = [m, n](TensorNode& o) {
            const Tensor& pa = o.parents[0];
            if (!pa->needs_grad) return;
            pa->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    pa->grad[static_cast<size_t>(i) * n + j] += o.grad[static_cast<size_t>(j) * m + i];
        };
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a->shape != b->shape)
        throw std::invalid_argument("add shape mismatch: " + shape_str(a->shape) + " vs " +
                                    shape_str(b->shape));
    Tensor out = make_tensor(a->shape);
    for (size_t i = 0; i < out->size(); ++i) (*out->data)[i] = (*a->data)[i] + (*b->data)[i];
    out->parents = {a, b};
    set_needs_grad(*out);
    if (out->needs_grad) {
        out->backprop = [](TensorNode& o) {
            for (const Tensor& p : o.parents) {
                if (!p->needs_grad) continue;
                p->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) p->grad[i] += o.grad[i];
            }
        };
    }
    return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
    if (b->rows() != 1 || b->cols() != a->cols())
        throw std::invalid_argument("add_rowvec shape mismatch: " + shape_str(a->shape) + " vs " +
                                    shape_str(b->shape));
    int m = a->rows(), n = a->cols();
    Tensor out = make_tensor(a->shape);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->at(i, j) = a->at(i, j) + b->at(0, j);
    out->parents = {a, b};
    set_needs_grad(*out);
    if (out->needs_grad) {
        out->backprop = [m, n](TensorNode& o) {
            const Tensor& pa = o.parents[0];
            const Tensor& pb = o.parents[1];
            if (pa->needs_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
            }
            if (pb->needs_grad) {
                pb->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) pb->grad[j] += o.grad[static_cast<size_t>(i) * n + j];
            }
        };
    }
    return out;
}

Tensor multiply(const Tensor& a, const Tensor& b) {
    if (a->shape != b->shape)
        throw std::invalid_argument("multiply shape mismatch: " + shape_str(a->shape) + " vs " +
                                    shape_str(b->shape));
    Tensor out = make_tensor(a->shape);
    for (size_t i = 0; i < out->size(); ++i) (*out->data)[i] = (*a->data)[i] * (*b->data)[i];
    out->parents = {a, b};
    set_needs_grad(*out);
    if (out->needs_grad) {
        out->backprop = [](TensorNode& o) {
            const Tensor& pa = o.parents[0];
            const Tensor& pb = o.parents[1];
            if (pa->needs_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * (*pb->data)[i];
            }
            if (pb->needs_grad) {
                pb->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i] * (*pa->data)[i];
            }
        };
    }
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = make_tensor(a->shape);
    for (size_t i = 0; i < out->size(); ++i) (*out->data)[i] = (*a->data)[i] * c;
    out->parents = {a};
    set_needs_grad(*out);
    if (out->needs_grad) {
        out->backprop = [c](TensorNode& o) {
            const Tensor& pa = o.parents[0];
            if (!pa->needs_grad) return;
            pa->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * c;
        };
    }
    return out;
}

Tensor gelu(const Tensor& a) {
    static const double inv_sqrt2 = 0.7071067811865475244;
    static const double inv_sqrt2pi = 0.3989422804014326779;
    Tensor out = make_tensor(a->shape);
    for (size_t i = 0; i < out->size(); ++i) {
        double x = (*a->data)[i];
        (*out->data)[i] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
    }
    out->parents = {a};
    set_needs_grad(*out);
    if (out->needs_grad) {
        out->backprop = [](TensorNode& o) {
            const Tensor& pa = o.parents[0];
            if (!pa->needs_grad) return;
            pa->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) {
                double x = (*pa->data)[i];
                double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                pa->grad[i] += o.grad[i] * (cdf + x * pdf);
            }
        };
    }
    return out;
}

Tensor softmax(const Tensor& a, int axis) {
    int nd = static_cast<int>(a->shape.size());
    if (axis < 0) axis += nd;
    if (axis != nd - 1)
        throw std::invalid_argument("softmax: only the last axis is supported");
    int n = a->shape.back();
    int rows = static_cast<int>(a->size()) / n;
    Tensor out = make_tensor(a->shape);
    for (int r = 0; r < rows; ++r) {
        const double* in = a->data->data() + static_cast<size_t>(r) * n;
        double* o = out->data->data() + static_cast<size_t>(r) * n;
        double mx = in[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, in[j]);
        double denom = 0.0;
        for (int j = 0; j < n; ++j) {
            o[j] = std::exp(in[j] - mx);
            denom += o[j];
        }
        for (int j = 0; j < n; ++j) o[j] /= denom;
    }
    out->parents = {a};
    set_needs_grad(*out);
    if (out->needs_grad) {
        out->backprop = [rows, n](TensorNode& o) {
            const Tensor& pa = o.parents[0];
            if (!pa->needs_grad) return;
            pa->ensure_grad();
            for (int r = 0; r < rows; ++r) {
                const double* y = o.data->data() + static_cast<size_t>(r) * n;
                const double* dy = o.grad.data() + static_cast<size_t>(r) * n;
                double* dx = pa->grad.data() + static_cast<size_t>(r) * n;
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += y[j] * dy[j];
                for (int j = 0; j < n; ++j) dx[j] += y[j] * (dy[j] - dot);
            }
        };
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
    int n = x->shape.back();
    if (gain->size() != static_cast<size_t>(n) || shift->size() != static_cast<size_t>(n))
        throw std::invalid_argument("layer_norm: gain/shift must match last dimension " +
                                    std::to_string(n));
    int rows = static_cast<int>(x->size()) / n;
    Tensor out = make_tensor(x->shape);
    auto means = std::make_shared<std::vector<double>>(rows);
    auto rstds = std::make_shared<std::vector<double>>(rows);
    for (int r = 0; r < rows; ++r) {
        const double* in = x->data->data() + static_cast<size_t>(r) * n;
        double* o = out->data->data() + static_cast<size_t>(r) * n;
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += in[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (in[j] - mean) * (in[j] - mean);
        var /= n;
        double rstd = 1.0 / std::sqrt(var + eps);
        (*means)[r] = mean;
        (*rstds)[r] = rstd;
        for (int j = 0; j < n; ++j)
            o[j] = (in[j] - mean) * rstd * (*gain->data)[j] + (*shift->data)[j];
    }
    out->parents = {x, gain, shift};
    set_needs_grad(*out);
    if (out->needs_grad) {
        out->backprop = [rows, n, means, rstds](TensorNode& o) {
            const Tensor& px = o.parents[0];
            const Tensor& pg = o.parents[1];
            const Tensor& ps = o.parents[2];
            if (pg->needs_grad) pg->ensure_grad();
            if (ps->needs_grad) ps->ensure_grad();
            if (px->needs_grad) px->ensure_grad();
            for (int r = 0; r < rows; ++r) {
                const double* in = px->data->data() + static_cast<size_t>(r) * n;
                const double* dy = o.grad.data() + static_cast<size_t>(r) * n;
                double mean = (*means)[r], rstd = (*rstds)[r];
                if (pg->needs_grad || ps->needs_grad) {
                    for (int j = 0; j < n; ++j) {
                        double xhat = (in[j] - mean) * rstd;
                        if (pg->needs_grad) pg->grad[j] += dy[j] * xhat;
                        if (ps->needs_grad) ps->grad[j] += dy[j];
                    }
                }
                if (px->needs_grad) {
                    double* dx = px->grad.data() + static_cast<size_t>(r) * n;
                    double sum_dg = 0.0, sum_dgx = 0.0;
                    for (int j = 0; j < n; ++j) {
                        double g = dy[j] * (*pg->data)[j];
                        double xhat = (in[j] - mean) * rstd;
                        sum_dg += g;
                        sum_dgx += g * xhat;
                    }
                    for (int j = 0; j < n; ++j) {
                        double g = dy[j] * (*pg->data)[j];
                        double xhat = (in[j] - mean) * rstd;
                        dx[j] += rstd * (g - sum_dg / n - xhat * sum_dgx / n);
                    }
                }
            }
        };
    }
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     const std::vector<bool>& mask) {
    int t_len = logits->rows(), vocab = logits->cols();
    if (targets.size() != static_cast<size_t>(t_len) || mask.size() != static_cast<size_t>(t_len))
        throw std::invalid_argument("cross_entropy: targets/mask length must equal logit rows");
    int n_active = 0;
    for (int t = 0; t < t_len; ++t) {
        if (!mask[t]) continue;
        if (targets[t] < 0 || targets[t] >= vocab)
            throw std::invalid_argument("cross_entropy: target id out of range");
        ++n_active;
    }
    Tensor out = make_tensor({1});
    // softmax kept for the backward pass
    auto probs = std::make_shared<std::vector<double>>(logits->size());
    double total = 0.0;
    for (int t = 0; t < t_len; ++t) {
        const double* row = logits->data->data() + static_cast<size_t>(t) * vocab;
        double* p = probs->data() + static_cast<size_t>(t) * vocab;
        double mx = row[0];
        for (int j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < vocab; ++j) {
            p[j] = std::exp(row[j] - mx);
            denom += p[j];
        }
        for (int j = 0; j < vocab; ++j) p[j] /= denom;
        if (mask[t]) total += -(row[targets[t]] - mx - std::log(denom));
    }
    (*out->data)[0] = n_active > 0 ? total / n_active : 0.0;
    out->parents = {logits};
    set_needs_grad(*out);
    if (out->needs_grad) {
        auto tgt = std::make_shared<std::vector<int>>(targets);
        auto msk = std::make_shared<std::vector<bool>>(mask);
        out->backprop = [t_len, vocab, n_active, probs, tgt, msk](TensorNode& o) {
            const Tensor& pl = o.parents[0];
            if (!pl->needs_grad || n_active == 0) return;
            pl->ensure_grad();
            double g = o.grad[0] / n_active;
            for (int t = 0; t < t_len; ++t) {
                if (!(*msk)[t]) continue;
                const double* p = probs->data() + static_cast<size_t>(t) * vocab;
                double* dl = pl->grad.data() + static_cast<size_t>(t) * vocab;
                for (int j = 0; j < vocab; ++j) dl[j] += g * p[j];
                dl[(*tgt)[t]] -= g;
            }
        };
    }
    return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
    int vocab = table->rows(), dim = table->cols();
    int t_len = static_cast<int>(ids.size());
    Tensor out = make_tensor({t_len, dim});
    for (int t = 0; t < t_len; ++t) {
        if (ids[t] < 0 || ids[t] >= vocab)
            throw std::invalid_argument("embedding_lookup: id " + std::to_string(ids[t]) +
                                        " out of range [0," + std::to_string(vocab) + ")");
        std::copy_n(table->data->data() + static_cast<size_t>(ids[t]) * dim, dim,
                    out->data->data() + static_cast<size_t>(t) * dim);
    }
    out->parents = {table};
    set_needs_grad(*out);
    if (out->needs_grad) {
        auto ids_copy = std::make_shared<std::vector<int>>(ids);
        out->backprop = [dim, ids_copy](TensorNode& o) {
            const Tensor& pt = o.parents[0];
            if (!pt->needs_grad) return;
            pt->ensure_grad();
            for (size_t t = 0; t < ids_copy->size(); ++t) {
                const double* dy = o.grad.data() + t * dim;
                double* dst = pt->grad.data() + static_cast<size_t>((*ids_copy)[t]) * dim;
                for (int j = 0; j < dim; ++j) dst[j] += dy[j];
            }
        };
    }
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    int m = parts[0]->rows();
    int total = 0;
    for (const auto& p : parts) {
        if (p->rows() != m)
            throw std::invalid_argument("concat_cols: row mismatch " + shape_str(p->shape));
        total += p->cols();
    }
    Tensor out = make_tensor({m, total});
    int off = 0;
    for (const auto& p : parts) {
        int n = p->cols();
        for (int i = 0; i < m; ++i)
            std::copy_n(p->data->data() + static_cast<size_t>(i) * n, n,
                        out->data->data() + static_cast<size_t>(i) * total + off);
        off += n;
    }
    out->parents = parts;
    set_needs_grad(*out);
    if (out->needs_grad) {
        out->backprop = [m, total](TensorNode& o) {
            int off2 = 0;
            for (const Tensor& p : o.parents) {
                int n = p->cols();
                if (p->needs_grad) {
                    p->ensure_grad();
                    for (int i = 0; i < m; ++i) {
                        const double* dy = o.grad.data() + static_cast<size_t>(i) * total + off2;
                        double* dst = p->grad.data() + static_cast<size_t>(i) * n;
                        for (int j = 0; j < n; ++j) dst[j] += dy[j];
                    }
                }
                off2 += n;
            }
        };
    }
    return out;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    if (c0 < 0 || c1 > a->cols() || c0 >= c1)
        throw std::invalid_argument("slice_cols: bad range");
    int m = a->rows(), n = a->cols(), w = c1 - c0;
    Tensor out = make_tensor({m, w});
    for (int i = 0; i < m; ++i)
        std::copy_n(a->data->data() + static_cast<size_t>(i) * n + c0, w,
                    out->data->data() + static_cast<size_t>(i) * w);
    out->parents = {a};
    set_needs_grad(*out);
    if (out->needs_grad) {
        out->backprop = [m, n, w, c0](TensorNode& o) {
            const Tensor& pa = o.parents[0];
            if (!pa->needs_grad) return;
            pa->ensure_grad();
            for (int i = 0; i < m; ++i) {
                const double* dy = o.grad.data() + static_cast<size_t>(i) * w;
                double* dst = pa->grad.data() + static_cast<size_t>(i) * n + c0;
                for (int j = 0; j < w; ++j) dst[j] += dy[j];
            }
        };
    }
    return out;
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
    if (r0 < 0 || r1 > a->rows() || r0 >= r1)
        throw std::invalid_argument("slice_rows: bad range");
    int n = a->cols(), h = r1 - r0;
    Tensor out = make_tensor({h, n});
    std::copy_n(a->data->data() + static_cast<size_t>(r0) * n, static_cast<size_t>(h) * n,
                out->data->data());
    out->parents = {a};
    set_needs_grad(*out);
    if (out->needs_grad) {
        out->backprop = [n, h, r0](TensorNode& o) {
            const Tensor& pa = o.parents[0];
            if (!pa->needs_grad) return;
            pa->ensure_grad();
            for (size_t i = 0; i < static_cast<size_t>(h) * n; ++i)
                pa->grad[static_cast<size_t>(r0) * n + i] += o.grad[i];
        };
    }
    return out;
}

Tensor sum(const Tensor& a) {
    Tensor out = make_tensor({1});
    double s = 0.0;
    for (double v : *a->data) s += v;
    (*out->data)[0] = s;
    out->parents = {a};
    set_needs_grad(*out);
    if (out->needs_grad) {
        out->backprop = [](TensorNode& o) {
            const Tensor& pa = o.parents[0];
            if (!pa->needs_grad) return;
            pa->ensure_grad();
            for (double& g : pa->grad) g += o.grad[0];
        };
    }
    return out;
}

void backward(const Tensor& loss) {
    if (loss->size() != 1)
        throw std::invalid_argument("backward: loss must be a scalar, got " +
                                    shape_str(loss->shape));
    // iterative DFS topological sort over the recorded graph
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode* p = node->parents[idx].get();
            ++idx;
            if (p->needs_grad && !visited.count(p) && !p->parents.empty()) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->ensure_grad();
    loss->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop) {
            (*it)->ensure_grad();
            (*it)->backprop(**it);
        }
    }
}

void zero_grads(const std::vector<Tensor>& params) {
    for (const auto& p : params) p->zero_grad();
}

}  // namespace clair
