#include "motionseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>

namespace motionseg {

namespace {

void require_defined(const Tensor& t, const char* what) {
  if (!t.defined()) throw std::invalid_argument(std::string(what) + " is undefined");
}

Tape* common_tape(std::initializer_list<const Tensor*> operands) {
  Tape* tape = nullptr;
  for (const Tensor* t : operands) {
    if (!t->tracked()) continue;
    if (tape == nullptr) {
      tape = t->tape();
    } else if (tape != t->tape()) {
      throw std::invalid_argument("operands were recorded on different tapes");
    }
  }
  return tape;
}

std::vector<int> broadcast_shape(const std::vector<int>& a, const std::vector<int>& b) {
  const int ra = static_cast<int>(a.size());
  const int rb = static_cast<int>(b.size());
  const int rank = std::max(ra, rb);
  std::vector<int> out(static_cast<size_t>(rank));
  for (int i = 0; i < rank; ++i) {
    const int ai = i - (rank - ra);  // right-aligned axis, negative means missing
    const int bi = i - (rank - rb);
    const int da = ai < 0 ? 1 : a[static_cast<size_t>(ai)];
    const int db = bi < 0 ? 1 : b[static_cast<size_t>(bi)];
    if (da != db && da != 1 && db != 1) {
      throw std::invalid_argument("shapes " + shape_str(a) + " and " + shape_str(b) + " do not broadcast");
    }
    out[static_cast<size_t>(i)] = std::max(da, db);
  }
  return out;
}

// Strides of `shape` right-aligned into `out` rank, 0 on broadcast axes.
std::vector<long long> aligned_strides(const std::vector<int>& shape, const std::vector<int>& out) {
  const int orank = static_cast<int>(out.size());
  const int r = static_cast<int>(shape.size());
  std::vector<long long> natural(static_cast<size_t>(r));
  long long s = 1;
  for (int i = r - 1; i >= 0; --i) {
    natural[static_cast<size_t>(i)] = s;
    s *= shape[static_cast<size_t>(i)];
  }
  std::vector<long long> st(static_cast<size_t>(orank), 0);
  for (int i = 0; i < r; ++i) {
    const int o = orank - r + i;
    st[static_cast<size_t>(o)] = shape[static_cast<size_t>(i)] == 1 ? 0 : natural[static_cast<size_t>(i)];
  }
  return st;
}

// Walks every element of `out_shape`, handing fn the flat output index plus
// the flat indices into two (possibly broadcast) operands.
template <typename F>
void broadcast_walk(const std::vector<int>& out_shape, const std::vector<long long>& sa,
                    const std::vector<long long>& sb, F&& fn) {
  const long long n = shape_size(out_shape);
  const int rank = static_cast<int>(out_shape.size());
  std::vector<int> idx(static_cast<size_t>(rank), 0);
  long long ia = 0, ib = 0;
  for (long long o = 0; o < n; ++o) {
    fn(o, ia, ib);
    for (int ax = rank - 1; ax >= 0; --ax) {
      ++idx[static_cast<size_t>(ax)];
      ia += sa[static_cast<size_t>(ax)];
      ib += sb[static_cast<size_t>(ax)];
      if (idx[static_cast<size_t>(ax)] < out_shape[static_cast<size_t>(ax)]) break;
      idx[static_cast<size_t>(ax)] = 0;
      ia -= sa[static_cast<size_t>(ax)] * out_shape[static_cast<size_t>(ax)];
      ib -= sb[static_cast<size_t>(ax)] * out_shape[static_cast<size_t>(ax)];
    }
  }
}

struct BinaryPlan {
  std::vector<int> out_shape;
  std::vector<long long> sa, sb;
  Tensor out;
};

BinaryPlan plan_binary(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  BinaryPlan p;
  p.out_shape = broadcast_shape(a.shape(), b.shape());
  p.sa = aligned_strides(a.shape(), p.out_shape);
  p.sb = aligned_strides(b.shape(), p.out_shape);
  p.out = Tensor(p.out_shape);
  return p;
}

int node_or_minus1(const Tensor& t) { return t.tracked() ? t.node() : -1; }

std::vector<int> collect_parents(std::initializer_list<int> nodes) {
  std::vector<int> parents;
  for (int n : nodes) {
    if (n >= 0) parents.push_back(n);
  }
  return parents;
}

Tensor binary_ew(const Tensor& a, const Tensor& b, const char* name, double (*fwd)(double, double),
                 void (*bwd)(double g, double av, double bv, double* da, double* db)) {
  BinaryPlan p = plan_binary(a, b, name);
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = p.out.data();
  broadcast_walk(p.out_shape, p.sa, p.sb,
                 [&](long long o, long long ia, long long ib) { od[o] = fwd(ad[ia], bd[ib]); });
  Tape* tape = common_tape({&a, &b});
  if (!tape) return p.out;
  const int na = node_or_minus1(a), nb = node_or_minus1(b);
  Tensor ac = a.detached(), bc = b.detached();
  auto out_shape = p.out_shape;
  auto sa = p.sa, sb = p.sb;
  return tape->adopt(std::move(p.out), collect_parents({na, nb}),
                     [=](const double* g, Tape& t) {
                       double* da = na >= 0 ? t.grad_buffer(na) : nullptr;
                       double* db = nb >= 0 ? t.grad_buffer(nb) : nullptr;
                       const double* av = ac.data();
                       const double* bv = bc.data();
                       broadcast_walk(out_shape, sa, sb, [&](long long o, long long ia, long long ib) {
                         double ga = 0, gb = 0;
                         bwd(g[o], av[ia], bv[ib], &ga, &gb);
                         if (da) da[ia] += ga;
                         if (db) db[ib] += gb;
                       });
                     });
}

Tensor unary_ew(const Tensor& x, const char* name, double (*fwd)(double),
                double (*dfd)(double xv, double yv)) {
  require_defined(x, name);
  Tensor out(x.shape());
  const double* xd = x.data();
  double* od = out.data();
  const long long n = x.size();
  for (long long i = 0; i < n; ++i) od[i] = fwd(xd[i]);
  Tape* tape = common_tape({&x});
  if (!tape) return out;
  Tensor xc = x.detached(), yc = out.detached();
  const int nx = x.node();
  return tape->adopt(std::move(out), {nx}, [=](const double* g, Tape& t) {
    double* dx = t.grad_buffer(nx);
    const double* xv = xc.data();
    const double* yv = yc.data();
    const long long m = xc.size();
    for (long long i = 0; i < m; ++i) dx[i] += g[i] * dfd(xv[i], yv[i]);
  });
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Conv2dSpec& spec) {
  require_defined(input, "conv2d input");
  require_defined(kernel, "conv2d kernel");
  if (input.rank() != 4 || kernel.rank() != 4) {
    throw std::invalid_argument("conv2d expects input [N,C,H,W] and kernel [K,C,kh,kw], got " +
                                shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
  }
  if (input.dim(1) != kernel.dim(1)) {
    throw std::invalid_argument("conv2d channel mismatch: input " + shape_str(input.shape()) +
                                " vs kernel " + shape_str(kernel.shape()));
  }
  if (spec.stride < 1 || spec.padding < 0 || spec.dilation < 1) {
    throw std::invalid_argument("conv2d spec out of range (stride " + std::to_string(spec.stride) +
                                ", padding " + std::to_string(spec.padding) + ", dilation " +
                                std::to_string(spec.dilation) + ")");
  }
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int K = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const int span_h = spec.dilation * (kh - 1) + 1;
  const int span_w = spec.dilation * (kw - 1) + 1;
  const int OH = (H + 2 * spec.padding - span_h) / spec.stride + 1;
  const int OW = (W + 2 * spec.padding - span_w) / spec.stride + 1;
  if (H + 2 * spec.padding < span_h || W + 2 * spec.padding < span_w) {
    throw std::invalid_argument("conv2d kernel span exceeds padded input: input " +
                                shape_str(input.shape()) + ", kernel " + shape_str(kernel.shape()));
  }
  Tensor out({N, K, OH, OW});
  const double* in = input.data();
  const double* ker = kernel.data();
  double* od = out.data();
  const auto in_at = [&](int n, int c, int h, int w) {
    return in[((static_cast<long long>(n) * C + c) * H + h) * W + w];
  };
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) {
      for (int oh = 0; oh < OH; ++oh) {
        for (int ow = 0; ow < OW; ++ow) {
          double acc = 0;
          for (int c = 0; c < C; ++c) {
            const double* kr = ker + ((static_cast<long long>(k) * C + c) * kh) * kw;
            for (int i = 0; i < kh; ++i) {
              const int h = oh * spec.stride - spec.padding + i * spec.dilation;
              if (h < 0 || h >= H) continue;
              for (int j = 0; j < kw; ++j) {
                const int w = ow * spec.stride - spec.padding + j * spec.dilation;
                if (w < 0 || w >= W) continue;
                acc += in_at(n, c, h, w) * kr[i * kw + j];
              }
            }
          }
          od[((static_cast<long long>(n) * K + k) * OH + oh) * OW + ow] = acc;
        }
      }
    }
  }
  Tape* tape = common_tape({&input, &kernel});
  if (!tape) return out;
  const int ni = node_or_minus1(input), nk = node_or_minus1(kernel);
  Tensor ic = input.detached(), kc = kernel.detached();
  const Conv2dSpec sp = spec;
  return tape->adopt(std::move(out), collect_parents({ni, nk}), [=](const double* g, Tape& t) {
    double* din = ni >= 0 ? t.grad_buffer(ni) : nullptr;
    double* dker = nk >= 0 ? t.grad_buffer(nk) : nullptr;
    const double* iv = ic.data();
    const double* kv = kc.data();
    for (int n = 0; n < N; ++n) {
      for (int k = 0; k < K; ++k) {
        for (int oh = 0; oh < OH; ++oh) {
          for (int ow = 0; ow < OW; ++ow) {
            const double go = g[((static_cast<long long>(n) * K + k) * OH + oh) * OW + ow];
            if (go == 0) continue;
            for (int c = 0; c < C; ++c) {
              for (int i = 0; i < kh; ++i) {
                const int h = oh * sp.stride - sp.padding + i * sp.dilation;
                if (h < 0 || h >= H) continue;
                for (int j = 0; j < kw; ++j) {
                  const int w = ow * sp.stride - sp.padding + j * sp.dilation;
                  if (w < 0 || w >= W) continue;
                  const long long iidx = ((static_cast<long long>(n) * C + c) * H + h) * W + w;
                  const long long kidx = ((static_cast<long long>(k) * C + c) * kh + i) * kw + j;
                  if (din) din[iidx] += go * kv[kidx];
                  if (dker) dker[kidx] += go * iv[iidx];
                }
              }
            }
          }
        }
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul lhs");
  require_defined(b, "matmul rhs");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul expects [M,K] x [K,N], got " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
  }
  const int M = a.dim(0), K = a.dim(1), N = b.dim(1);
  Tensor out({M, N});
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = out.data();
  for (int i = 0; i < M; ++i) {
    for (int k = 0; k < K; ++k) {
      const double av = ad[static_cast<long long>(i) * K + k];
      if (av == 0) continue;
      const double* brow = bd + static_cast<long long>(k) * N;
      double* orow = od + static_cast<long long>(i) * N;
      for (int j = 0; j < N; ++j) orow[j] += av * brow[j];
    }
  }
  Tape* tape = common_tape({&a, &b});
  if (!tape) return out;
  const int na = node_or_minus1(a), nb = node_or_minus1(b);
  Tensor ac = a.detached(), bc = b.detached();
  return tape->adopt(std::move(out), collect_parents({na, nb}), [=](const double* g, Tape& t) {
    const double* av = ac.data();
    const double* bv = bc.data();
    if (na >= 0) {  // dA = g * B^T
      double* da = t.grad_buffer(na);
      for (int i = 0; i < M; ++i) {
        for (int k = 0; k < K; ++k) {
          double s = 0;
          const double* grow = g + static_cast<long long>(i) * N;
          const double* brow = bv + static_cast<long long>(k) * N;
          for (int j = 0; j < N; ++j) s += grow[j] * brow[j];
          da[static_cast<long long>(i) * K + k] += s;
        }
      }
    }
    if (nb >= 0) {  // dB = A^T * g
      double* db = t.grad_buffer(nb);
      for (int i = 0; i < M; ++i) {
        const double* grow = g + static_cast<long long>(i) * N;
        for (int k = 0; k < K; ++k) {
          const double av_ik = av[static_cast<long long>(i) * K + k];
          if (av_ik == 0) continue;
          double* drow = db + static_cast<long long>(k) * N;
          for (int j = 0; j < N; ++j) drow[j] += av_ik * grow[j];
        }
      }
    }
  });
}

Tensor transpose2d(const Tensor& a) {
  require_defined(a, "transpose2d input");
  if (a.rank() != 2) {
    throw std::invalid_argument("transpose2d expects a matrix, got " + shape_str(a.shape()));
  }
  const int M = a.dim(0), N = a.dim(1);
  Tensor out({N, M});
  const double* ad = a.data();
  double* od = out.data();
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) od[static_cast<long long>(j) * M + i] = ad[static_cast<long long>(i) * N + j];
  Tape* tape = common_tape({&a});
  if (!tape) return out;
  const int na = a.node();
  return tape->adopt(std::move(out), {na}, [=](const double* g, Tape& t) {
    double* da = t.grad_buffer(na);
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < M; ++i) da[static_cast<long long>(i) * N + j] += g[static_cast<long long>(j) * M + i];
  });
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  require_defined(x, "reshape input");
  if (shape_size(shape) != x.size()) {
    throw std::invalid_argument("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                                " changes element count");
  }
  Tensor out(shape, std::vector<double>(x.data(), x.data() + x.size()));
  Tape* tape = common_tape({&x});
  if (!tape) return out;
  const int nx = x.node();
  const long long n = x.size();
  return tape->adopt(std::move(out), {nx}, [=](const double* g, Tape& t) {
    double* dx = t.grad_buffer(nx);
    for (long long i = 0; i < n; ++i) dx[i] += g[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat needs at least one tensor");
  for (const Tensor& p : parts) require_defined(p, "concat part");
  const int rank = parts[0].rank();
  if (axis < 0 || axis >= rank) {
    throw std::invalid_argument("concat axis " + std::to_string(axis) + " out of range for rank " +
                                std::to_string(rank));
  }
  std::vector<int> out_shape = parts[0].shape();
  for (size_t i = 1; i < parts.size(); ++i) {
    if (parts[i].rank() != rank) throw std::invalid_argument("concat rank mismatch");
    for (int ax = 0; ax < rank; ++ax) {
      if (ax == axis) continue;
      if (parts[i].dim(ax) != parts[0].dim(ax)) {
        throw std::invalid_argument("concat extent mismatch off axis " + std::to_string(axis) + ": " +
                                    shape_str(parts[0].shape()) + " vs " + shape_str(parts[i].shape()));
      }
    }
    out_shape[static_cast<size_t>(axis)] += parts[i].dim(axis);
  }
  long long outer = 1, inner = 1;
  for (int ax = 0; ax < axis; ++ax) outer *= out_shape[static_cast<size_t>(ax)];
  for (int ax = axis + 1; ax < rank; ++ax) inner *= out_shape[static_cast<size_t>(ax)];
  const long long out_axis = out_shape[static_cast<size_t>(axis)];
  Tensor out(out_shape);
  double* od = out.data();
  long long offset = 0;  // running position along the concat axis
  std::vector<long long> offsets(parts.size());
  for (size_t p = 0; p < parts.size(); ++p) {
    offsets[p] = offset;
    const long long pa = parts[p].dim(axis);
    const double* pd = parts[p].data();
    for (long long o = 0; o < outer; ++o) {
      std::copy(pd + o * pa * inner, pd + (o + 1) * pa * inner,
                od + (o * out_axis + offset) * inner);
    }
    offset += pa;
  }
  Tape* tape = nullptr;
  for (const Tensor& p : parts) {
    Tape* t = common_tape({&p});
    if (t) {
      if (tape && tape != t) throw std::invalid_argument("operands were recorded on different tapes");
      tape = t;
    }
  }
  if (!tape) return out;
  std::vector<int> nodes(parts.size());
  std::vector<long long> part_axis(parts.size());
  std::vector<int> parents;
  for (size_t p = 0; p < parts.size(); ++p) {
    nodes[p] = node_or_minus1(parts[p]);
    part_axis[p] = parts[p].dim(axis);
    if (nodes[p] >= 0) parents.push_back(nodes[p]);
  }
  return tape->adopt(std::move(out), std::move(parents), [=](const double* g, Tape& t) {
    for (size_t p = 0; p < nodes.size(); ++p) {
      if (nodes[p] < 0) continue;
      double* dp = t.grad_buffer(nodes[p]);
      const long long pa = part_axis[p];
      for (long long o = 0; o < outer; ++o) {
        const double* src = g + (o * out_axis + offsets[p]) * inner;
        double* dst = dp + o * pa * inner;
        for (long long i = 0; i < pa * inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor softmax_over(const Tensor& x, const std::vector<int>& axes) {
  require_defined(x, "softmax input");
  if (axes.empty()) throw std::invalid_argument("softmax_over needs at least one axis");
  const int rank = x.rank();
  std::vector<bool> grouped(static_cast<size_t>(rank), false);
  for (int ax : axes) {
    if (ax < 0 || ax >= rank) {
      throw std::invalid_argument("softmax axis " + std::to_string(ax) + " out of range for " +
                                  shape_str(x.shape()));
    }
    if (grouped[static_cast<size_t>(ax)]) throw std::invalid_argument("softmax axis repeated");
    grouped[static_cast<size_t>(ax)] = true;
  }
  // Per-axis strides into the "kept slot" (axes not normalized over) and the
  // walk below visits elements maintaining both the flat and kept indices.
  long long kept_count = 1;
  for (int ax = 0; ax < rank; ++ax)
    if (!grouped[static_cast<size_t>(ax)]) kept_count *= x.dim(ax);
  std::vector<long long> kept_stride(static_cast<size_t>(rank), 0);
  long long ks = 1;
  for (int ax = rank - 1; ax >= 0; --ax) {
    if (grouped[static_cast<size_t>(ax)]) continue;
    kept_stride[static_cast<size_t>(ax)] = ks;
    ks *= x.dim(ax);
  }
  const auto shape = x.shape();
  const long long n = x.size();
  const auto walk = [rank, shape, n](const std::vector<long long>& kstride, auto&& fn) {
    std::vector<int> idx(static_cast<size_t>(rank), 0);
    long long k = 0;
    for (long long f = 0; f < n; ++f) {
      fn(f, k);
      for (int ax = rank - 1; ax >= 0; --ax) {
        ++idx[static_cast<size_t>(ax)];
        k += kstride[static_cast<size_t>(ax)];
        if (idx[static_cast<size_t>(ax)] < shape[static_cast<size_t>(ax)]) break;
        idx[static_cast<size_t>(ax)] = 0;
        k -= kstride[static_cast<size_t>(ax)] * shape[static_cast<size_t>(ax)];
      }
    }
  };
  Tensor out(shape);
  const double* xd = x.data();
  double* od = out.data();
  std::vector<double> peak(static_cast<size_t>(kept_count), -std::numeric_limits<double>::infinity());
  walk(kept_stride, [&](long long f, long long k) { peak[static_cast<size_t>(k)] = std::max(peak[static_cast<size_t>(k)], xd[f]); });
  std::vector<double> denom(static_cast<size_t>(kept_count), 0.0);
  walk(kept_stride, [&](long long f, long long k) {
    od[f] = std::exp(xd[f] - peak[static_cast<size_t>(k)]);
    denom[static_cast<size_t>(k)] += od[f];
  });
  walk(kept_stride, [&](long long f, long long k) { od[f] /= denom[static_cast<size_t>(k)]; });
  Tape* tape = common_tape({&x});
  if (!tape) return out;
  const int nx = x.node();
  Tensor yc = out.detached();
  return tape->adopt(std::move(out), {nx}, [=](const double* g, Tape& t) {
    double* dx = t.grad_buffer(nx);
    const double* y = yc.data();
    std::vector<double> dot(static_cast<size_t>(kept_count), 0.0);
    walk(kept_stride, [&](long long f, long long k) { dot[static_cast<size_t>(k)] += g[f] * y[f]; });
    walk(kept_stride, [&](long long f, long long k) { dx[f] += y[f] * (g[f] - dot[static_cast<size_t>(k)]); });
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double g, double, double, double* da, double* db) {
        *da = g;
        *db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double g, double, double, double* da, double* db) {
        *da = g;
        *db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double g, double av, double bv, double* da, double* db) {
        *da = g * bv;
        *db = g * av;
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary_ew(
      x, "sigmoid",
      [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary_ew(
      x, "relu", [](double v) { return v > 0 ? v : 0.0; },
      [](double xv, double) { return xv > 0 ? 1.0 : 0.0; });
}

Tensor affine(const Tensor& x, double scale, double shift) {
  require_defined(x, "affine input");
  Tensor out(x.shape());
  const double* xd = x.data();
  double* od = out.data();
  const long long n = x.size();
  for (long long i = 0; i < n; ++i) od[i] = scale * xd[i] + shift;
  Tape* tape = common_tape({&x});
  if (!tape) return out;
  const int nx = x.node();
  return tape->adopt(std::move(out), {nx}, [=](const double* g, Tape& t) {
    double* dx = t.grad_buffer(nx);
    for (long long i = 0; i < n; ++i) dx[i] += g[i] * scale;
  });
}

Tensor log(const Tensor& x) {
  return unary_ew(
      x, "log", [](double v) { return std::log(v); },
      [](double xv, double) { return 1.0 / xv; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clamp needs lo < hi");
  require_defined(x, "clamp input");
  Tensor out(x.shape());
  const double* xd = x.data();
  double* od = out.data();
  const long long n = x.size();
  for (long long i = 0; i < n; ++i) od[i] = std::min(std::max(xd[i], lo), hi);
  Tape* tape = common_tape({&x});
  if (!tape) return out;
  const int nx = x.node();
  Tensor xc = x.detached();
  return tape->adopt(std::move(out), {nx}, [=](const double* g, Tape& t) {
    double* dx = t.grad_buffer(nx);
    const double* xv = xc.data();
    for (long long i = 0; i < n; ++i) {
      if (xv[i] > lo && xv[i] < hi) dx[i] += g[i];
    }
  });
}

Tensor sum_all(const Tensor& x) {
  require_defined(x, "sum input");
  double s = 0;
  const double* xd = x.data();
  const long long n = x.size();
  for (long long i = 0; i < n; ++i) s += xd[i];
  Tensor out = Tensor::scalar(s);
  Tape* tape = common_tape({&x});
  if (!tape) return out;
  const int nx = x.node();
  return tape->adopt(std::move(out), {nx}, [=](const double* g, Tape& t) {
    double* dx = t.grad_buffer(nx);
    for (long long i = 0; i < n; ++i) dx[i] += g[0];
  });
}

Tensor mean_all(const Tensor& x) {
  require_defined(x, "mean input");
  return affine(sum_all(x), 1.0 / static_cast<double>(x.size()));
}

Tensor reduce_mean(const Tensor& x, int axis) {
  require_defined(x, "reduce_mean input");
  if (axis < 0 || axis >= x.rank()) {
    throw std::invalid_argument("reduce_mean axis " + std::to_string(axis) + " out of range for " +
                                shape_str(x.shape()));
  }
  std::vector<int> out_shape = x.shape();
  const int A = out_shape[static_cast<size_t>(axis)];
  out_shape[static_cast<size_t>(axis)] = 1;
  long long outer = 1, inner = 1;
  for (int ax = 0; ax < axis; ++ax) outer *= x.dim(ax);
  for (int ax = axis + 1; ax < x.rank(); ++ax) inner *= x.dim(ax);
  Tensor out(out_shape);
  const double* xd = x.data();
  double* od = out.data();
  for (long long o = 0; o < outer; ++o) {
    for (long long i = 0; i < inner; ++i) {
      double s = 0;
      for (int a = 0; a < A; ++a) s += xd[(o * A + a) * inner + i];
      od[o * inner + i] = s / A;
    }
  }
  Tape* tape = common_tape({&x});
  if (!tape) return out;
  const int nx = x.node();
  return tape->adopt(std::move(out), {nx}, [=](const double* g, Tape& t) {
    double* dx = t.grad_buffer(nx);
    for (long long o = 0; o < outer; ++o)
      for (int a = 0; a < A; ++a)
        for (long long i = 0; i < inner; ++i) dx[(o * A + a) * inner + i] += g[o * inner + i] / A;
  });
}

Tensor reduce_max(const Tensor& x, int axis) {
  require_defined(x, "reduce_max input");
  if (axis < 0 || axis >= x.rank()) {
    throw std::invalid_argument("reduce_max axis " + std::to_string(axis) + " out of range for " +
                                shape_str(x.shape()));
  }
  std::vector<int> out_shape = x.shape();
  const int A = out_shape[static_cast<size_t>(axis)];
  out_shape[static_cast<size_t>(axis)] = 1;
  long long outer = 1, inner = 1;
  for (int ax = 0; ax < axis; ++ax) outer *= x.dim(ax);
  for (int ax = axis + 1; ax < x.rank(); ++ax) inner *= x.dim(ax);
  Tensor out(out_shape);
  auto arg = std::make_shared<std::vector<int>>(static_cast<size_t>(outer * inner), 0);
  const double* xd = x.data();
  double* od = out.data();
  for (long long o = 0; o < outer; ++o) {
    for (long long i = 0; i < inner; ++i) {
      double best = xd[o * A * inner + i];
      int best_a = 0;
      for (int a = 1; a < A; ++a) {
        const double v = xd[(o * A + a) * inner + i];
        if (v > best) {
          best = v;
          best_a = a;
        }
      }
      od[o * inner + i] = best;
      (*arg)[static_cast<size_t>(o * inner + i)] = best_a;
    }
  }
  Tape* tape = common_tape({&x});
  if (!tape) return out;
  const int nx = x.node();
  return tape->adopt(std::move(out), {nx}, [=](const double* g, Tape& t) {
    double* dx = t.grad_buffer(nx);
    for (long long o = 0; o < outer; ++o)
      for (long long i = 0; i < inner; ++i) {
        const int a = (*arg)[static_cast<size_t>(o * inner + i)];
        dx[(o * A + a) * inner + i] += g[o * inner + i];
      }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_defined(x, "global_avg_pool input");
  if (x.rank() != 4) {
    throw std::invalid_argument("global_avg_pool expects [N,C,H,W], got " + shape_str(x.shape()));
  }
  const int N = x.dim(0), C = x.dim(1);
  const long long hw = static_cast<long long>(x.dim(2)) * x.dim(3);
  Tensor out({N, C});
  const double* xd = x.data();
  double* od = out.data();
  for (long long nc = 0; nc < static_cast<long long>(N) * C; ++nc) {
    double s = 0;
    for (long long p = 0; p < hw; ++p) s += xd[nc * hw + p];
    od[nc] = s / static_cast<double>(hw);
  }
  Tape* tape = common_tape({&x});
  if (!tape) return out;
  const int nx = x.node();
  return tape->adopt(std::move(out), {nx}, [=](const double* g, Tape& t) {
    double* dx = t.grad_buffer(nx);
    for (long long nc = 0; nc < static_cast<long long>(N) * C; ++nc)
      for (long long p = 0; p < hw; ++p) dx[nc * hw + p] += g[nc] / static_cast<double>(hw);
  });
}

Tensor upsample_bilinear(const Tensor& x, int factor) {
  require_defined(x, "upsample input");
  if (x.rank() != 4) {
    throw std::invalid_argument("upsample_bilinear expects [N,C,H,W], got " + shape_str(x.shape()));
  }
  if (factor < 1) throw std::invalid_argument("upsample factor must be >= 1");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int OH = H * factor, OW = W * factor;
  // Sample positions follow the align-corners-false convention:
  // src = (dst + 0.5) / factor - 0.5, edges clamped.
  const auto taps = [factor](int src_len, int dst_len) {
    std::vector<int> i0(static_cast<size_t>(dst_len)), i1(static_cast<size_t>(dst_len));
    std::vector<double> w1(static_cast<size_t>(dst_len));
    for (int d = 0; d < dst_len; ++d) {
      double s = (d + 0.5) / factor - 0.5;
      s = std::min(std::max(s, 0.0), static_cast<double>(src_len - 1));
      const int lo = static_cast<int>(std::floor(s));
      i0[static_cast<size_t>(d)] = lo;
      i1[static_cast<size_t>(d)] = std::min(lo + 1, src_len - 1);
      w1[static_cast<size_t>(d)] = s - lo;
    }
    return std::tuple(i0, i1, w1);
  };
  const auto [h0, h1, wh] = taps(H, OH);
  const auto [w0, w1v, ww] = taps(W, OW);
  Tensor out({N, C, OH, OW});
  const double* xd = x.data();
  double* od = out.data();
  for (long long nc = 0; nc < static_cast<long long>(N) * C; ++nc) {
    const double* plane = xd + nc * H * W;
    double* oplane = od + nc * OH * OW;
    for (int oh = 0; oh < OH; ++oh) {
      const double fh = wh[static_cast<size_t>(oh)];
      const double* r0 = plane + static_cast<long long>(h0[static_cast<size_t>(oh)]) * W;
      const double* r1 = plane + static_cast<long long>(h1[static_cast<size_t>(oh)]) * W;
      for (int ow = 0; ow < OW; ++ow) {
        const double fw = ww[static_cast<size_t>(ow)];
        const int a = w0[static_cast<size_t>(ow)], b = w1v[static_cast<size_t>(ow)];
        oplane[static_cast<long long>(oh) * OW + ow] =
            (1 - fh) * ((1 - fw) * r0[a] + fw * r0[b]) + fh * ((1 - fw) * r1[a] + fw * r1[b]);
      }
    }
  }
  Tape* tape = common_tape({&x});
  if (!tape) return out;
  const int nx = x.node();
  return tape->adopt(std::move(out), {nx},
                     [=, h0 = h0, h1 = h1, wh = wh, w0 = w0, w1v = w1v, ww = ww](const double* g, Tape& t) {
                       double* dx = t.grad_buffer(nx);
                       for (long long nc = 0; nc < static_cast<long long>(N) * C; ++nc) {
                         double* dplane = dx + nc * H * W;
                         const double* gplane = g + nc * OH * OW;
                         for (int oh = 0; oh < OH; ++oh) {
                           const double fh = wh[static_cast<size_t>(oh)];
                           double* r0 = dplane + static_cast<long long>(h0[static_cast<size_t>(oh)]) * W;
                           double* r1 = dplane + static_cast<long long>(h1[static_cast<size_t>(oh)]) * W;
                           for (int ow = 0; ow < OW; ++ow) {
                             const double fw = ww[static_cast<size_t>(ow)];
                             const int a = w0[static_cast<size_t>(ow)], b = w1v[static_cast<size_t>(ow)];
                             const double go = gplane[static_cast<long long>(oh) * OW + ow];
                             r0[a] += (1 - fh) * (1 - fw) * go;
                             r0[b] += (1 - fh) * fw * go;
                             r1[a] += fh * (1 - fw) * go;
                             r1[b] += fh * fw * go;
                           }
                         }
                       }
                     });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_defined(b, "linear bias");
  if (b.rank() != 1 || w.rank() != 2 || b.dim(0) != w.dim(1)) {
    throw std::invalid_argument("linear expects w [I,O] and b [O], got " + shape_str(w.shape()) +
                                " and " + shape_str(b.shape()));
  }
  return add(matmul(x, w), b);
}

Tensor conv_chw(const Tensor& x, const Tensor& kernel, const Conv2dSpec& spec) {
  require_defined(x, "conv_chw input");
  if (x.rank() != 3) {
    throw std::invalid_argument("conv_chw expects [C,H,W], got " + shape_str(x.shape()));
  }
  Tensor batched = reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
  Tensor y = conv2d(batched, kernel, spec);
  return reshape(y, {y.dim(1), y.dim(2), y.dim(3)});
}

Tensor upsample_chw(const Tensor& x, int factor) {
  require_defined(x, "upsample_chw input");
  if (x.rank() != 3) {
    throw std::invalid_argument("upsample_chw expects [C,H,W], got " + shape_str(x.shape()));
  }
  Tensor batched = reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
  Tensor y = upsample_bilinear(batched, factor);
  return reshape(y, {y.dim(1), y.dim(2), y.dim(3)});
}

}  // namespace motionseg
