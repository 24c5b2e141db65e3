#include "oikg/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "oikg/errors.hpp"

namespace oikg::nn {

namespace {

using detail::Node;

void require_matrix(const Tensor& x, const char* op) {
    if (x.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(x.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
}

// Gradient buffer of parent i, or nullptr when it is not tracked.
double* parent_grad(Node& self, std::size_t i) {
    Node& p = *self.parents[i];
    return p.requires_grad ? p.ensure_grad().data() : nullptr;
}

const std::vector<double>& parent_value(Node& self, std::size_t i) { return self.parents[i]->value; }

// Row count / width along the last axis.
std::pair<std::size_t, std::size_t> row_layout(const Tensor& x) {
    if (x.rank() == 1) return {1, x.dim(0)};
    if (x.rank() == 2) return {x.dim(0), x.dim(1)};
    throw ShapeError("expected a vector or matrix, got " + shape_string(x.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t n = a.dim(0), p = a.dim(1), q = b.dim(1);
    if (b.dim(0) != p) {
        throw ShapeError("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    std::vector<double> y(n * q, 0.0);
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < p; ++k) {
            const double aik = av[i * p + k];
            const double* brow = &bv[k * q];
            double* yrow = &y[i * q];
            for (std::size_t j = 0; j < q; ++j) {
                yrow[j] += aik * brow[j];
            }
        }
    }
    return Tensor::make_result({n, q}, std::move(y), {a, b}, [n, p, q](Node& self) {
        const auto& A = parent_value(self, 0);
        const auto& B = parent_value(self, 1);
        const auto& dy = self.grad;
        if (double* da = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < p; ++k) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < q; ++j) acc += dy[i * q + j] * B[k * q + j];
                    da[i * p + k] += acc;
                }
            }
        }
        if (double* db = parent_grad(self, 1)) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < p; ++k) {
                    const double aik = A[i * p + k];
                    for (std::size_t j = 0; j < q; ++j) db[k * q + j] += aik * dy[i * q + j];
                }
            }
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> y(a.values().begin(), a.values().end());
    const auto bv = b.values();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
    return Tensor::make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (double* g = parent_grad(self, k)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> y(a.values().begin(), a.values().end());
    const auto bv = b.values();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
    return Tensor::make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (double* g = parent_grad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> y(a.numel());
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
    return Tensor::make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
        const auto& A = parent_value(self, 0);
        const auto& B = parent_value(self, 1);
        if (double* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * B[i];
        }
        if (double* g = parent_grad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * A[i];
        }
    });
}

Tensor scale(const Tensor& x, double s) {
    std::vector<double> y(x.values().begin(), x.values().end());
    for (auto& v : y) v *= s;
    return Tensor::make_result(x.shape(), std::move(y), {x}, [s](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += s * self.grad[i];
        }
    });
}

Tensor add_row(const Tensor& x, const Tensor& b) {
    require_matrix(x, "add_row");
    const std::size_t n = x.dim(0), q = x.dim(1);
    if (b.rank() != 1 || b.dim(0) != q) {
        throw ShapeError("add_row: bias " + shape_string(b.shape()) + " does not match " + shape_string(x.shape()));
    }
    std::vector<double> y(x.values().begin(), x.values().end());
    const auto bv = b.values();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) y[i * q + j] += bv[j];
    return Tensor::make_result({n, q}, std::move(y), {x, b}, [n, q](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (double* g = parent_grad(self, 1)) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < q; ++j) g[j] += self.grad[i * q + j];
        }
    });
}

Tensor broadcast_rows(const Tensor& v, std::size_t n) {
    if (v.rank() != 1) throw ShapeError("broadcast_rows: expected a vector, got " + shape_string(v.shape()));
    const std::size_t q = v.dim(0);
    std::vector<double> y(n * q);
    const auto vv = v.values();
    for (std::size_t i = 0; i < n; ++i) std::copy(vv.begin(), vv.end(), y.begin() + static_cast<std::ptrdiff_t>(i * q));
    return Tensor::make_result({n, q}, std::move(y), {v}, [n, q](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < q; ++j) g[j] += self.grad[i * q + j];
        }
    });
}

Tensor relu(const Tensor& x) {
    std::vector<double> y(x.values().begin(), x.values().end());
    for (auto& v : y) v = v > 0.0 ? v : 0.0;
    return Tensor::make_result(x.shape(), std::move(y), {x}, [](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            const auto& X = parent_value(self, 0);
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                if (X[i] > 0.0) g[i] += self.grad[i];
            }
        }
    });
}

Tensor softmax(const Tensor& x) {
    const auto [n, m] = row_layout(x);
    if (m == 0) throw ShapeError("softmax: empty rows");
    std::vector<double> y(x.values().begin(), x.values().end());
    for (std::size_t i = 0; i < n; ++i) {
        double* row = &y[i * m];
        const double mx = *std::max_element(row, row + m);
        double total = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            row[j] = std::exp(row[j] - mx);
            total += row[j];
        }
        for (std::size_t j = 0; j < m; ++j) row[j] /= total;
    }
    return Tensor::make_result(x.shape(), std::move(y), {x}, [n = n, m = m](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            const auto& Y = self.value;
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < m; ++j) dot += self.grad[i * m + j] * Y[i * m + j];
                for (std::size_t j = 0; j < m; ++j) g[i * m + j] += Y[i * m + j] * (self.grad[i * m + j] - dot);
            }
        }
    });
}

Tensor log_softmax(const Tensor& x) {
    const auto [n, m] = row_layout(x);
    if (m == 0) throw ShapeError("log_softmax: empty rows");
    std::vector<double> y(x.values().begin(), x.values().end());
    std::vector<double> probs(y.size());
    for (std::size_t i = 0; i < n; ++i) {
        double* row = &y[i * m];
        const double mx = *std::max_element(row, row + m);
        double total = 0.0;
        for (std::size_t j = 0; j < m; ++j) total += std::exp(row[j] - mx);
        const double lse = mx + std::log(total);
        for (std::size_t j = 0; j < m; ++j) {
            row[j] -= lse;
            probs[i * m + j] = std::exp(row[j]);
        }
    }
    return Tensor::make_result(x.shape(), std::move(y), {x}, [n = n, m = m, probs = std::move(probs)](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < n; ++i) {
                double total = 0.0;
                for (std::size_t j = 0; j < m; ++j) total += self.grad[i * m + j];
                for (std::size_t j = 0; j < m; ++j) g[i * m + j] += self.grad[i * m + j] - probs[i * m + j] * total;
            }
        }
    });
}

Tensor transpose(const Tensor& x) {
    require_matrix(x, "transpose");
    const std::size_t n = x.dim(0), m = x.dim(1);
    std::vector<double> y(n * m);
    const auto xv = x.values();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) y[j * n + i] = xv[i * m + j];
    return Tensor::make_result({m, n}, std::move(y), {x}, [n, m](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) g[i * m + j] += self.grad[j * n + i];
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.numel()) {
        throw ShapeError("reshape: " + shape_string(x.shape()) + " cannot become " + shape_string(shape));
    }
    std::vector<double> y(x.values().begin(), x.values().end());
    return Tensor::make_result(std::move(shape), std::move(y), {x}, [](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t n = parts[0].rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_matrix(p, "concat_cols");
        if (p.dim(0) != n) throw ShapeError("concat_cols: row counts differ");
        widths.push_back(p.dim(1));
        total += p.dim(1);
    }
    std::vector<double> y(n * total);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto pv = parts[k].values();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j) y[i * total + offset + j] = pv[i * widths[k] + j];
        offset += widths[k];
    }
    return Tensor::make_result({n, total}, std::move(y), parts, [n, total, widths](Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            if (double* g = parent_grad(self, k)) {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += self.grad[i * total + off + j];
            }
            off += widths[k];
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t width = parts[0].rank() == 1 ? parts[0].dim(0) : parts[0].cols();
    std::vector<double> y;
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) {
        const auto [r, c] = row_layout(p);
        if (c != width) throw ShapeError("concat_rows: column counts differ");
        (void)r;
        sizes.push_back(p.numel());
        y.insert(y.end(), p.values().begin(), p.values().end());
    }
    const std::size_t rows = y.size() / std::max<std::size_t>(width, 1);
    return Tensor::make_result({rows, width}, std::move(y), parts, [sizes](Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            if (double* g = parent_grad(self, k)) {
                for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += self.grad[off + i];
            }
            off += sizes[k];
        }
    });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
    require_matrix(x, "slice_cols");
    const std::size_t n = x.dim(0), m = x.dim(1);
    if (begin + count > m) throw ShapeError("slice_cols: range exceeds " + shape_string(x.shape()));
    std::vector<double> y(n * count);
    const auto xv = x.values();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < count; ++j) y[i * count + j] = xv[i * m + begin + j];
    return Tensor::make_result({n, count}, std::move(y), {x}, [n, m, begin, count](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < count; ++j) g[i * m + begin + j] += self.grad[i * count + j];
        }
    });
}

Tensor select_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
    require_matrix(x, "select_rows");
    const std::size_t n = x.dim(0), m = x.dim(1);
    std::vector<double> y(rows.size() * m);
    const auto xv = x.values();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= n) throw ShapeError("select_rows: row index out of range");
        std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(rows[r] * m), m, y.begin() + static_cast<std::ptrdiff_t>(r * m));
    }
    return Tensor::make_result({rows.size(), m}, std::move(y), {x}, [rows, m](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            for (std::size_t r = 0; r < rows.size(); ++r)
                for (std::size_t j = 0; j < m; ++j) g[rows[r] * m + j] += self.grad[r * m + j];
        }
    });
}

Tensor mean_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
    require_matrix(x, "mean_rows");
    if (rows.empty()) throw ShapeError("mean_rows: no rows selected");
    const std::size_t n = x.dim(0), m = x.dim(1);
    std::vector<double> y(m, 0.0);
    const auto xv = x.values();
    for (std::size_t r : rows) {
        if (r >= n) throw ShapeError("mean_rows: row index out of range");
        for (std::size_t j = 0; j < m; ++j) y[j] += xv[r * m + j];
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (auto& v : y) v *= inv;
    return Tensor::make_result({m}, std::move(y), {x}, [rows, m, inv](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            for (std::size_t r : rows)
                for (std::size_t j = 0; j < m; ++j) g[r * m + j] += inv * self.grad[j];
        }
    });
}

Tensor sum(const Tensor& x) {
    const auto xv = x.values();
    const double total = std::accumulate(xv.begin(), xv.end(), 0.0);
    return Tensor::make_result({}, {total}, {x}, [](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            const std::size_t n = self.parents[0]->value.size();
            for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
        }
    });
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
    if (logits.rank() != 1) throw ShapeError("cross_entropy: logits must be a vector");
    const std::size_t m = logits.dim(0);
    if (target >= m) {
        throw std::invalid_argument("cross_entropy: target " + std::to_string(target) + " out of range for " +
                                    std::to_string(m) + " logits");
    }
    const auto lv = logits.values();
    const double mx = *std::max_element(lv.begin(), lv.end());
    double total = 0.0;
    std::vector<double> probs(m);
    for (std::size_t j = 0; j < m; ++j) {
        probs[j] = std::exp(lv[j] - mx);
        total += probs[j];
    }
    for (auto& p : probs) p /= total;
    const double loss = std::log(total) - (lv[target] - mx);
    return Tensor::make_result({}, {loss}, {logits}, [target, probs = std::move(probs)](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            for (std::size_t j = 0; j < probs.size(); ++j) {
                g[j] += self.grad[0] * (probs[j] - (j == target ? 1.0 : 0.0));
            }
        }
    });
}

Tensor layer_norm_rows(const Tensor& x, double eps) {
    require_matrix(x, "layer_norm_rows");
    const std::size_t n = x.dim(0), m = x.dim(1);
    std::vector<double> y(x.values().begin(), x.values().end());
    std::vector<double> inv_std(n);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = &y[i * m];
        double mean = 0.0;
        for (std::size_t j = 0; j < m; ++j) mean += row[j];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t j = 0; j < m; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(m);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < m; ++j) row[j] = (row[j] - mean) * inv_std[i];
    }
    return Tensor::make_result({n, m}, std::move(y), {x}, [n, m, inv_std = std::move(inv_std)](Node& self) {
        if (double* g = parent_grad(self, 0)) {
            const auto& Y = self.value;
            for (std::size_t i = 0; i < n; ++i) {
                double mean_dy = 0.0, mean_dy_y = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    mean_dy += self.grad[i * m + j];
                    mean_dy_y += self.grad[i * m + j] * Y[i * m + j];
                }
                mean_dy /= static_cast<double>(m);
                mean_dy_y /= static_cast<double>(m);
                for (std::size_t j = 0; j < m; ++j) {
                    g[i * m + j] += inv_std[i] * (self.grad[i * m + j] - mean_dy - Y[i * m + j] * mean_dy_y);
                }
            }
        }
    });
}

}  // namespace oikg::nn
