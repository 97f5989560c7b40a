#include "srn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

#include "srn/error.hpp"

namespace srn::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

Graph& graph_of(Var v) {
  if (!v.valid()) throw InvalidInput("op applied to an invalid Var");
  return *v.graph;
}

void same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw InvalidInput("op inputs live on different graphs");
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank)
    throw InvalidInput(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                       shape_str(t.shape()));
}

// cols [C*K*K, B*Ho*Wo]; column index b*Ho*Wo + oy*Wo + ox.
void im2col(const Tensor& x, std::size_t K, std::size_t stride, std::size_t pad, std::size_t Ho,
            std::size_t Wo, RowMat& cols) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t HW = Ho * Wo;
  cols.setZero(static_cast<Eigen::Index>(C * K * K), static_cast<Eigen::Index>(B * HW));
  const double* src = x.raw();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ky = 0; ky < K; ++ky) {
      for (std::size_t kx = 0; kx < K; ++kx) {
        double* row = cols.row(static_cast<Eigen::Index>((c * K + ky) * K + kx)).data();
        for (std::size_t b = 0; b < B; ++b) {
          const double* plane = src + (b * C + c) * H * W;
          double* dst = row + b * HW;
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (ix < 0 || ix >= static_cast<long>(W)) continue;
              dst[oy * Wo + ox] = plane[iy * W + ix];
            }
          }
        }
      }
    }
  }
}

void col2im(const RowMat& cols, std::size_t K, std::size_t stride, std::size_t pad,
            std::size_t Ho, std::size_t Wo, Tensor& dx) {
  const std::size_t B = dx.dim(0), C = dx.dim(1), H = dx.dim(2), W = dx.dim(3);
  const std::size_t HW = Ho * Wo;
  double* out = dx.raw();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ky = 0; ky < K; ++ky) {
      for (std::size_t kx = 0; kx < K; ++kx) {
        const double* row = cols.row(static_cast<Eigen::Index>((c * K + ky) * K + kx)).data();
        for (std::size_t b = 0; b < B; ++b) {
          double* plane = out + (b * C + c) * H * W;
          const double* srcrow = row + b * HW;
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (ix < 0 || ix >= static_cast<long>(W)) continue;
              plane[iy * W + ix] += srcrow[oy * Wo + ox];
            }
          }
        }
      }
    }
  }
}

template <typename F, typename G>
Var unary(Var x, F fwd, G dfdx_from_y) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = fwd(xv[i]);
  const int xid = x.id;
  Tensor ycopy = y;
  return g.record(std::move(y), {xid},
                  [xid, ycopy = std::move(ycopy), dfdx_from_y](Graph& gr, const Tensor& go) {
                    Tensor& gx = gr.grad_buffer(xid);
                    for (std::size_t i = 0; i < go.size(); ++i)
                      gx[i] += go[i] * dfdx_from_y(ycopy[i]);
                  });
}

}  // namespace

Var conv2d(Var x, Var w, Var b, std::size_t stride, std::size_t pad) {
  same_graph(x, w);
  same_graph(x, b);
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  require_rank(xv, 4, "conv2d input");
  require_rank(wv, 4, "conv2d weight");
  if (stride == 0) throw InvalidInput("conv2d: stride must be positive");
  const std::size_t B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const std::size_t O = wv.dim(0), K = wv.dim(2);
  if (wv.dim(1) != C || wv.dim(3) != K)
    throw InvalidInput("conv2d: weight " + shape_str(wv.shape()) + " incompatible with input " +
                       shape_str(xv.shape()));
  if (bv.size() != O) throw InvalidInput("conv2d: bias size must equal output channels");
  if (H + 2 * pad < K || W + 2 * pad < K) throw InvalidInput("conv2d: kernel larger than input");
  const std::size_t Ho = (H + 2 * pad - K) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - K) / stride + 1;
  const std::size_t HW = Ho * Wo;

  auto cols = std::make_shared<RowMat>();
  im2col(xv, K, stride, pad, Ho, Wo, *cols);
  CMapMat wm(wv.raw(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(C * K * K));
  RowMat prod = wm * (*cols);  // [O, B*HW]

  Tensor y({B, O, Ho, Wo});
  for (std::size_t bi = 0; bi < B; ++bi)
    for (std::size_t o = 0; o < O; ++o) {
      double* dst = y.raw() + (bi * O + o) * HW;
      const double* src = prod.row(static_cast<Eigen::Index>(o)).data() + bi * HW;
      for (std::size_t i = 0; i < HW; ++i) dst[i] = src[i] + bv[o];
    }

  const int xid = x.id, wid = w.id, bid = b.id;
  return g.record(std::move(y), {xid, wid, bid},
                  [=](Graph& gr, const Tensor& go) {
                    RowMat gy(static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(B * HW));
                    for (std::size_t bi = 0; bi < B; ++bi)
                      for (std::size_t o = 0; o < O; ++o) {
                        const double* src = go.raw() + (bi * O + o) * HW;
                        double* dst = gy.row(static_cast<Eigen::Index>(o)).data() + bi * HW;
                        std::copy(src, src + HW, dst);
                      }
                    if (gr.requires_grad(bid)) {
                      Tensor& gb = gr.grad_buffer(bid);
                      for (std::size_t o = 0; o < O; ++o)
                        gb[o] += gy.row(static_cast<Eigen::Index>(o)).sum();
                    }
                    if (gr.requires_grad(wid)) {
                      Tensor& gw = gr.grad_buffer(wid);
                      MapMat gwm(gw.raw(), static_cast<Eigen::Index>(O),
                                 static_cast<Eigen::Index>(C * K * K));
                      gwm.noalias() += gy * cols->transpose();
                    }
                    if (gr.requires_grad(xid)) {
                      const Tensor& wv2 = gr.value(wid);
                      CMapMat wm2(wv2.raw(), static_cast<Eigen::Index>(O),
                                  static_cast<Eigen::Index>(C * K * K));
                      RowMat gcols = wm2.transpose() * gy;
                      Tensor& gx = gr.grad_buffer(xid);
                      col2im(gcols, K, stride, pad, Ho, Wo, gx);
                    }
                  });
}

Var max_pool2(Var x) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  require_rank(xv, 4, "max_pool2");
  const std::size_t B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const std::size_t Ho = H / 2, Wo = W / 2;
  if (Ho == 0 || Wo == 0) throw InvalidInput("max_pool2: input smaller than window");
  Tensor y({B, C, Ho, Wo});
  std::vector<std::size_t> argmax(y.size());
  for (std::size_t p = 0; p < B * C; ++p) {
    const double* plane = xv.raw() + p * H * W;
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        std::size_t best = (2 * oy) * W + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (2 * oy + dy) * W + 2 * ox + dx;
            if (plane[idx] > plane[best]) best = idx;
          }
        const std::size_t o = p * Ho * Wo + oy * Wo + ox;
        y[o] = plane[best];
        argmax[o] = p * H * W + best;
      }
  }
  const int xid = x.id;
  return g.record(std::move(y), {xid},
                  [xid, argmax = std::move(argmax)](Graph& gr, const Tensor& go) {
                    Tensor& gx = gr.grad_buffer(xid);
                    for (std::size_t i = 0; i < go.size(); ++i) gx[argmax[i]] += go[i];
                  });
}

Var linear(Var x, Var w, Var b) {
  same_graph(x, w);
  same_graph(x, b);
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  require_rank(wv, 2, "linear weight");
  const bool vector_in = xv.rank() == 1;
  const std::size_t I = wv.dim(0), O = wv.dim(1);
  const std::size_t B = vector_in ? 1 : xv.dim(0);
  if ((vector_in ? xv.size() : xv.dim(1)) != I || (!vector_in && xv.rank() != 2))
    throw InvalidInput("linear: input " + shape_str(xv.shape()) + " incompatible with weight " +
                       shape_str(wv.shape()));
  if (bv.size() != O) throw InvalidInput("linear: bias size must equal output width");

  const auto Bi = static_cast<Eigen::Index>(B), Ii = static_cast<Eigen::Index>(I),
             Oi = static_cast<Eigen::Index>(O);
  Tensor y(vector_in ? Shape{O} : Shape{B, O});
  MapMat ym(y.raw(), Bi, Oi);
  ym.noalias() = CMapMat(xv.raw(), Bi, Ii) * CMapMat(wv.raw(), Ii, Oi);
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t o = 0; o < O; ++o) y[r * O + o] += bv[o];

  const int xid = x.id, wid = w.id, bid = b.id;
  return g.record(std::move(y), {xid, wid, bid}, [=](Graph& gr, const Tensor& go) {
    CMapMat gom(go.raw(), Bi, Oi);
    if (gr.requires_grad(bid)) {
      Tensor& gb = gr.grad_buffer(bid);
      for (std::size_t r = 0; r < B; ++r)
        for (std::size_t o = 0; o < O; ++o) gb[o] += go[r * O + o];
    }
    if (gr.requires_grad(wid)) {
      MapMat gw(gr.grad_buffer(wid).raw(), Ii, Oi);
      gw.noalias() += CMapMat(gr.value(xid).raw(), Bi, Ii).transpose() * gom;
    }
    if (gr.requires_grad(xid)) {
      MapMat gx(gr.grad_buffer(xid).raw(), Bi, Ii);
      gx.noalias() += gom * CMapMat(gr.value(wid).raw(), Ii, Oi).transpose();
    }
  });
}

Var tanh(Var x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw InvalidInput("concat: no inputs");
  Graph& g = graph_of(parts[0]);
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw InvalidInput("concat: axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= s0[a];
  for (std::size_t a = axis + 1; a < s0.size(); ++a) inner *= s0[a];
  std::vector<std::size_t> extents;
  std::vector<int> ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    same_graph(parts[0], p);
    const Shape& s = p.shape();
    if (s.size() != s0.size()) throw InvalidInput("concat: rank mismatch");
    for (std::size_t a = 0; a < s.size(); ++a)
      if (a != axis && s[a] != s0[a])
        throw InvalidInput("concat: extent mismatch " + shape_str(s) + " vs " + shape_str(s0));
    extents.push_back(s[axis]);
    ids.push_back(p.id);
    total += s[axis];
  }
  Shape out_shape = s0;
  out_shape[axis] = total;
  Tensor y(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    const std::size_t chunk = extents[k] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy(pv.raw() + o * chunk, pv.raw() + (o + 1) * chunk,
                y.raw() + o * total * inner + offset * inner);
    offset += extents[k];
  }
  return g.record(std::move(y), ids, [=](Graph& gr, const Tensor& go) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t chunk = extents[k] * inner;
      if (gr.requires_grad(ids[k])) {
        Tensor& gp = gr.grad_buffer(ids[k]);
        for (std::size_t o = 0; o < outer; ++o) {
          const double* src = go.raw() + o * total * inner + off * inner;
          double* dst = gp.raw() + o * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
      off += extents[k];
    }
  });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  if (xv.rank() == 0) throw InvalidInput("gather_rows: scalar input");
  const std::size_t n = xv.dim(0);
  const std::size_t row = xv.size() / std::max<std::size_t>(n, 1);
  Shape out_shape = xv.shape();
  out_shape[0] = rows.size();
  Tensor y(out_shape);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= n) throw InvalidInput("gather_rows: row index out of range");
    std::copy(xv.raw() + idx[k] * row, xv.raw() + (idx[k] + 1) * row, y.raw() + k * row);
  }
  const int xid = x.id;
  return g.record(std::move(y), {xid}, [xid, row, idx = std::move(idx)](Graph& gr,
                                                                        const Tensor& go) {
    Tensor& gx = gr.grad_buffer(xid);
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t i = 0; i < row; ++i) gx[idx[k] * row + i] += go[k * row + i];
  });
}

Var reshape(Var x, Shape shape) {
  Graph& g = graph_of(x);
  Tensor y = x.value().reshaped(std::move(shape));
  const int xid = x.id;
  return g.record(std::move(y), {xid}, [xid](Graph& gr, const Tensor& go) {
    Tensor& gx = gr.grad_buffer(xid);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
  });
}

Var flatten(Var x) { return reshape(x, {x.size()}); }

Var dot_similarity(Var a, Var b) {
  same_graph(a, b);
  Graph& g = graph_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "dot_similarity");
  require_rank(bv, 2, "dot_similarity");
  if (av.dim(1) != bv.dim(1)) throw InvalidInput("dot_similarity: descriptor width mismatch");
  const auto N = static_cast<Eigen::Index>(av.dim(0)), M = static_cast<Eigen::Index>(bv.dim(0)),
             D = static_cast<Eigen::Index>(av.dim(1));
  Tensor y({av.dim(0), bv.dim(0)});
  MapMat(y.raw(), N, M).noalias() = CMapMat(av.raw(), N, D) * CMapMat(bv.raw(), M, D).transpose();
  const int aid = a.id, bid = b.id;
  return g.record(std::move(y), {aid, bid}, [=](Graph& gr, const Tensor& go) {
    CMapMat gom(go.raw(), N, M);
    if (gr.requires_grad(aid)) {
      MapMat ga(gr.grad_buffer(aid).raw(), N, D);
      ga.noalias() += gom * CMapMat(gr.value(bid).raw(), M, D);
    }
    if (gr.requires_grad(bid)) {
      MapMat gb(gr.grad_buffer(bid).raw(), M, D);
      gb.noalias() += gom.transpose() * CMapMat(gr.value(aid).raw(), N, D);
    }
  });
}

Var matmul(Var a, Var b) {
  same_graph(a, b);
  Graph& g = graph_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "matmul");
  require_rank(bv, 2, "matmul");
  if (av.dim(1) != bv.dim(0)) throw InvalidInput("matmul: inner extent mismatch");
  const auto N = static_cast<Eigen::Index>(av.dim(0)), K = static_cast<Eigen::Index>(av.dim(1)),
             M = static_cast<Eigen::Index>(bv.dim(1));
  Tensor y({av.dim(0), bv.dim(1)});
  MapMat(y.raw(), N, M).noalias() = CMapMat(av.raw(), N, K) * CMapMat(bv.raw(), K, M);
  const int aid = a.id, bid = b.id;
  return g.record(std::move(y), {aid, bid}, [=](Graph& gr, const Tensor& go) {
    CMapMat gom(go.raw(), N, M);
    if (gr.requires_grad(aid)) {
      MapMat ga(gr.grad_buffer(aid).raw(), N, K);
      ga.noalias() += gom * CMapMat(gr.value(bid).raw(), K, M).transpose();
    }
    if (gr.requires_grad(bid)) {
      MapMat gb(gr.grad_buffer(bid).raw(), K, M);
      gb.noalias() += CMapMat(gr.value(aid).raw(), N, K).transpose() * gom;
    }
  });
}

Var scale(Var x, double s) {
  Graph& g = graph_of(x);
  Tensor y = x.value();
  for (auto& v : y.vec()) v *= s;
  const int xid = x.id;
  return g.record(std::move(y), {xid}, [xid, s](Graph& gr, const Tensor& go) {
    Tensor& gx = gr.grad_buffer(xid);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += s * go[i];
  });
}

namespace {
Var add_scaled(Var a, Var b, double sb) {
  same_graph(a, b);
  Graph& g = graph_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.size() != bv.size())
    throw InvalidInput("add: size mismatch " + shape_str(av.shape()) + " vs " +
                       shape_str(bv.shape()));
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += sb * bv[i];
  const int aid = a.id, bid = b.id;
  return g.record(std::move(y), {aid, bid}, [aid, bid, sb](Graph& gr, const Tensor& go) {
    if (gr.requires_grad(aid)) {
      Tensor& ga = gr.grad_buffer(aid);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (gr.requires_grad(bid)) {
      Tensor& gb = gr.grad_buffer(bid);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += sb * go[i];
    }
  });
}
}  // namespace

Var add(Var a, Var b) { return add_scaled(a, b, 1.0); }
Var sub(Var a, Var b) { return add_scaled(a, b, -1.0); }

Var sum_squares(Var x) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  double s = 0.0;
  for (double v : xv.data()) s += v * v;
  const int xid = x.id;
  return g.record(Tensor::scalar(s), {xid}, [xid](Graph& gr, const Tensor& go) {
    const Tensor& xv2 = gr.value(xid);
    Tensor& gx = gr.grad_buffer(xid);
    for (std::size_t i = 0; i < xv2.size(); ++i) gx[i] += 2.0 * xv2[i] * go[0];
  });
}

Var squared_error(Var x, const Tensor& target) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  if (xv.size() != target.size()) throw InvalidInput("squared_error: size mismatch");
  Tensor diff(xv.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    diff[i] = xv[i] - target[i];
    s += diff[i] * diff[i];
  }
  const int xid = x.id;
  return g.record(Tensor::scalar(s), {xid},
                  [xid, diff = std::move(diff)](Graph& gr, const Tensor& go) {
                    Tensor& gx = gr.grad_buffer(xid);
                    for (std::size_t i = 0; i < diff.size(); ++i) gx[i] += 2.0 * diff[i] * go[0];
                  });
}

Var mean_spatial(Var x) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  require_rank(xv, 4, "mean_spatial");
  const std::size_t B = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
  Tensor y({B, C});
  for (std::size_t p = 0; p < B * C; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < HW; ++i) s += xv[p * HW + i];
    y[p] = s / static_cast<double>(HW);
  }
  const int xid = x.id;
  return g.record(std::move(y), {xid}, [xid, HW](Graph& gr, const Tensor& go) {
    Tensor& gx = gr.grad_buffer(xid);
    const double inv = 1.0 / static_cast<double>(HW);
    for (std::size_t p = 0; p < go.size(); ++p)
      for (std::size_t i = 0; i < HW; ++i) gx[p * HW + i] += go[p] * inv;
  });
}

Var detach(Var x) { return graph_of(x).constant(x.value()); }

std::vector<OpInfo> op_catalog() {
  std::vector<OpInfo> cat;
  auto conv = [&](std::size_t K, std::size_t stride, std::size_t pad, std::size_t C,
                  std::size_t O, std::size_t H) {
    cat.push_back({"conv2d_k" + std::to_string(K) + "_s" + std::to_string(stride),
                   {{2, C, H, H}, {O, C, K, K}, {O}},
                   [stride, pad](Graph&, std::span<const Var> in) {
                     return conv2d(in[0], in[1], in[2], stride, pad);
                   },
                   K, stride});
  };
  conv(7, 1, 3, 1, 3, 9);
  conv(3, 1, 1, 2, 3, 6);
  conv(3, 2, 1, 2, 2, 7);
  conv(1, 1, 0, 3, 2, 4);
  cat.push_back({"max_pool2", {{2, 2, 5, 4}},
                 [](Graph&, std::span<const Var> in) { return max_pool2(in[0]); }});
  cat.push_back({"linear", {{3, 5}, {5, 4}, {4}},
                 [](Graph&, std::span<const Var> in) { return linear(in[0], in[1], in[2]); }});
  cat.push_back({"tanh", {{7}}, [](Graph&, std::span<const Var> in) { return tanh(in[0]); }});
  cat.push_back({"relu", {{7}}, [](Graph&, std::span<const Var> in) { return relu(in[0]); }});
  cat.push_back({"concat", {{2, 3}, {2, 2}},
                 [](Graph&, std::span<const Var> in) { return concat(in, 1); }});
  cat.push_back({"gather_rows", {{4, 3}},
                 [](Graph&, std::span<const Var> in) {
                   const std::size_t rows[] = {2, 0, 2};
                   return gather_rows(in[0], rows);
                 }});
  cat.push_back({"dot_similarity", {{3, 4}, {2, 4}},
                 [](Graph&, std::span<const Var> in) { return dot_similarity(in[0], in[1]); }});
  cat.push_back({"matmul", {{3, 4}, {4, 2}},
                 [](Graph&, std::span<const Var> in) { return matmul(in[0], in[1]); }});
  cat.push_back({"scale", {{5}}, [](Graph&, std::span<const Var> in) { return scale(in[0], -1.7); }});
  cat.push_back({"add", {{4}, {4}}, [](Graph&, std::span<const Var> in) { return add(in[0], in[1]); }});
  cat.push_back({"sum_squares", {{6}},
                 [](Graph&, std::span<const Var> in) { return sum_squares(in[0]); }});
  cat.push_back({"mean_spatial", {{2, 3, 2, 3}},
                 [](Graph&, std::span<const Var> in) { return mean_spatial(in[0]); }});
  return cat;
}

}  // namespace srn::ops
