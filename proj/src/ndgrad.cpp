#include "wmforge/ndgrad.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace wmforge::nd {

namespace {

std::string node_err(int id, const std::string& what) {
    return "node " + std::to_string(id) + ": " + what;
}

double stable_sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    double e = std::exp(v);
    return e / (1.0 + e);
}

double stable_logsigmoid(double v) {
    // log sigma(v) = -softplus(-v), safe at |v| ~ 1000
    if (v >= 0.0) return -std::log1p(std::exp(-v));
    return v - std::log1p(std::exp(v));
}

struct ConvDims {
    int ic, h, w;       // input
    int oc, icg, kh, kw; // kernel
    int oh, ow;         // output
    int ocg;            // outputs per group
};

ConvDims conv_dims(int id, const Tensor& x, const Tensor& wgt, const Tensor& b,
                   int stride, int pad, int groups) {
    if (x.shape.size() != 3) throw std::invalid_argument(node_err(id, "conv input must be CHW"));
    if (wgt.shape.size() != 4) throw std::invalid_argument(node_err(id, "conv kernel must be 4-D"));
    if (b.shape.size() != 1) throw std::invalid_argument(node_err(id, "conv bias must be 1-D"));
    ConvDims d;
    d.ic = int(x.shape[0]);
    d.h = int(x.shape[1]);
    d.w = int(x.shape[2]);
    d.oc = int(wgt.shape[0]);
    d.icg = int(wgt.shape[1]);
    d.kh = int(wgt.shape[2]);
    d.kw = int(wgt.shape[3]);
    if (groups < 1 || d.ic % groups != 0 || d.oc % groups != 0)
        throw std::invalid_argument(node_err(id, "bad group count"));
    if (d.icg != d.ic / groups)
        throw std::invalid_argument(node_err(id, "kernel channels disagree with groups"));
    if (int(b.shape[0]) != d.oc)
        throw std::invalid_argument(node_err(id, "bias length disagrees with kernel"));
    if (stride < 1) throw std::invalid_argument(node_err(id, "stride must be >= 1"));
    d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
    d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
    if (d.oh <= 0 || d.ow <= 0)
        throw std::invalid_argument(node_err(id, "conv output would be empty"));
    d.ocg = d.oc / groups;
    return d;
}

// valid output-column range for a kernel column at the given stride/pad
inline void ox_range(int kx, int pad, int stride, int w, int ow, int& lo, int& hi) {
    int shift = kx - pad; // ix = ox*stride + shift
    lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
    hi = (w - 1 - shift) >= 0 ? std::min(ow - 1, (w - 1 - shift) / stride) : -1;
}

} // namespace

int Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

void Graph::check_id(int id) const {
    if (id < 0 || id >= int(nodes_.size()))
        throw std::invalid_argument("unknown node id " + std::to_string(id));
}

int Graph::input(const std::string& name, Tensor v, bool requires_grad) {
    Node n;
    n.op = Op::Input;
    n.val = std::move(v);
    n.requires_grad = requires_grad;
    n.name = name;
    return push(std::move(n));
}

static bool any_requires(const std::vector<Node>& nodes, const std::vector<int>& args) {
    for (int a : args)
        if (nodes[std::size_t(a)].requires_grad) return true;
    return false;
}

#define WMF_DEFINE_OP(fn, opname, ...)                      \
    int Graph::fn {                                         \
        Node n;                                             \
        n.op = Op::opname;                                  \
        n.args = {__VA_ARGS__};                             \
        for (int a : n.args) check_id(a);                   \
        n.requires_grad = any_requires(nodes_, n.args);

WMF_DEFINE_OP(conv2d(int x, int w, int b, int stride, int pad, int groups), Conv2d, x, w, b)
    n.stride = stride;
    n.pad = pad;
    n.groups = groups;
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(add(int a, int b), Add, a, b)
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(sub(int a, int b), Sub, a, b)
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(mul(int a, int b), Mul, a, b)
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(scale(int x, float s), Scale, x)
    n.scalar = s;
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(silu(int x), SiLU, x)
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(chan_affine(int x, int gamma, int beta), ChanAffine, x, gamma, beta)
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(layernorm_ch(int x, float eps), LayerNormCh, x)
    n.eps = eps;
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(mean_pool(int x), MeanPool, x)
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(affine(int x, int w, int b), Affine, x, w, b)
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(sum(int x), Sum, x)
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(sigmoid(int x), Sigmoid, x)
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(log(int x), Log, x)
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(relu(int x), Relu, x)
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

WMF_DEFINE_OP(logsigmoid(int x), LogSigmoid, x)
    eval(n, int(nodes_.size()));
    return push(std::move(n));
}

#undef WMF_DEFINE_OP

void Graph::set_value(int id, const Tensor& v) {
    check_id(id);
    Node& n = nodes_[std::size_t(id)];
    if (n.op != Op::Input) throw std::invalid_argument(node_err(id, "only leaves can be rebound"));
    if (n.val.shape != v.shape)
        throw std::invalid_argument(node_err(id, "rebind shape " + Tensor::shape_str(v.shape) +
                                                     " != " + Tensor::shape_str(n.val.shape)));
    n.val.data = v.data;
    forward_current_ = false;
}

void Graph::set_value(const std::string& name, const Tensor& v) {
    int id = find(name);
    if (id < 0) throw std::invalid_argument("no input named '" + name + "'");
    set_value(id, v);
}

int Graph::find(const std::string& name) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].op == Op::Input && nodes_[i].name == name) return int(i);
    return -1;
}

const Tensor& Graph::forward(int out) {
    check_id(out);
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].op != Op::Input) eval(nodes_[i], int(i));
    forward_current_ = true;
    return nodes_[std::size_t(out)].val;
}

void Graph::backward(int out) {
    check_id(out);
    if (!forward_current_)
        throw std::logic_error("backward before forward: run forward after rebinding inputs");
    Node& o = nodes_[std::size_t(out)];
    if (o.val.numel() != 1)
        throw std::invalid_argument(node_err(out, "backward needs a scalar output"));
    for (Node& n : nodes_) {
        if (n.requires_grad) {
            if (n.grad.shape != n.val.shape) n.grad = Tensor(n.val.shape);
            else n.grad.fill(0.0f);
        }
    }
    if (!o.requires_grad) return; // nothing tracked feeds the output
    o.grad.data[0] = 1.0f;
    for (int id = int(nodes_.size()) - 1; id >= 0; --id) {
        Node& n = nodes_[std::size_t(id)];
        if (n.op == Op::Input || !n.requires_grad) continue;
        propagate(n, id);
    }
}

void Graph::eval(Node& n, int id) {
    switch (n.op) {
        case Op::Input:
            return;

        case Op::Conv2d: {
            const Tensor& x = nodes_[std::size_t(n.args[0])].val;
            const Tensor& wgt = nodes_[std::size_t(n.args[1])].val;
            const Tensor& b = nodes_[std::size_t(n.args[2])].val;
            ConvDims d = conv_dims(id, x, wgt, b, n.stride, n.pad, n.groups);
            if (n.val.shape.empty()) n.val = Tensor({d.oc, d.oh, d.ow});
            std::vector<double> acc(std::size_t(d.oh) * d.ow);
            for (int oc = 0; oc < d.oc; ++oc) {
                std::fill(acc.begin(), acc.end(), double(b.data[std::size_t(oc)]));
                int g = oc / d.ocg;
                for (int icg = 0; icg < d.icg; ++icg) {
                    int ic = g * d.icg + icg;
                    const float* xc = x.data.data() + std::size_t(ic) * d.h * d.w;
                    for (int ky = 0; ky < d.kh; ++ky)
                        for (int kx = 0; kx < d.kw; ++kx) {
                            double wv = wgt.data[((std::size_t(oc) * d.icg + icg) * d.kh + ky) * d.kw + kx];
                            if (wv == 0.0) continue;
                            int lo, hi;
                            ox_range(kx, n.pad, n.stride, d.w, d.ow, lo, hi);
                            int shift = kx - n.pad;
                            for (int oy = 0; oy < d.oh; ++oy) {
                                int iy = oy * n.stride + ky - n.pad;
                                if (iy < 0 || iy >= d.h) continue;
                                const float* xrow = xc + std::size_t(iy) * d.w;
                                double* arow = acc.data() + std::size_t(oy) * d.ow;
                                if (n.stride == 1) {
                                    const float* xs = xrow + shift;
                                    for (int ox = lo; ox <= hi; ++ox) arow[ox] += wv * xs[ox];
                                } else {
                                    for (int ox = lo; ox <= hi; ++ox)
                                        arow[ox] += wv * xrow[ox * n.stride + shift];
                                }
                            }
                        }
                }
                float* outp = n.val.data.data() + std::size_t(oc) * d.oh * d.ow;
                for (std::size_t i = 0; i < acc.size(); ++i) outp[i] = float(acc[i]);
            }
            return;
        }

        case Op::Add:
        case Op::Sub:
        case Op::Mul: {
            const Tensor& a = nodes_[std::size_t(n.args[0])].val;
            const Tensor& b = nodes_[std::size_t(n.args[1])].val;
            if (a.shape != b.shape)
                throw std::invalid_argument(node_err(id,
                                                     "elementwise shapes differ: " +
                                                         Tensor::shape_str(a.shape) + " vs " +
                                                         Tensor::shape_str(b.shape)));
            if (n.val.shape.empty()) n.val = Tensor(a.shape);
            const float* pa = a.data.data();
            const float* pb = b.data.data();
            float* po = n.val.data.data();
            std::size_t m = a.data.size();
            if (n.op == Op::Add)
                for (std::size_t i = 0; i < m; ++i) po[i] = pa[i] + pb[i];
            else if (n.op == Op::Sub)
                for (std::size_t i = 0; i < m; ++i) po[i] = pa[i] - pb[i];
            else
                for (std::size_t i = 0; i < m; ++i) po[i] = pa[i] * pb[i];
            return;
        }

        case Op::Scale: {
            const Tensor& x = nodes_[std::size_t(n.args[0])].val;
            if (n.val.shape.empty()) n.val = Tensor(x.shape);
            for (std::size_t i = 0; i < x.data.size(); ++i) n.val.data[i] = n.scalar * x.data[i];
            return;
        }

        case Op::SiLU: {
            const Tensor& x = nodes_[std::size_t(n.args[0])].val;
            if (n.val.shape.empty()) n.val = Tensor(x.shape);
            for (std::size_t i = 0; i < x.data.size(); ++i) {
                double v = x.data[i];
                n.val.data[i] = float(v * stable_sigmoid(v));
            }
            return;
        }

        case Op::ChanAffine: {
            const Tensor& x = nodes_[std::size_t(n.args[0])].val;
            const Tensor& g = nodes_[std::size_t(n.args[1])].val;
            const Tensor& b = nodes_[std::size_t(n.args[2])].val;
            if (x.shape.size() != 3 || g.shape.size() != 1 || b.shape.size() != 1 ||
                g.shape[0] != x.shape[0] || b.shape[0] != x.shape[0])
                throw std::invalid_argument(node_err(id,
                                                     "channel affine shape mismatch"));
            if (n.val.shape.empty()) n.val = Tensor(x.shape);
            std::size_t plane = std::size_t(x.shape[1]) * std::size_t(x.shape[2]);
            for (int c = 0; c < int(x.shape[0]); ++c) {
                float gc = g.data[std::size_t(c)], bc = b.data[std::size_t(c)];
                const float* xp = x.data.data() + std::size_t(c) * plane;
                float* op = n.val.data.data() + std::size_t(c) * plane;
                for (std::size_t i = 0; i < plane; ++i) op[i] = gc * xp[i] + bc;
            }
            return;
        }

        case Op::LayerNormCh: {
            const Tensor& x = nodes_[std::size_t(n.args[0])].val;
            if (x.shape.size() != 3)
                throw std::invalid_argument(node_err(id,
                                                     "layernorm input must be CHW"));
            if (n.val.shape.empty()) n.val = Tensor(x.shape);
            int C = int(x.shape[0]);
            std::size_t plane = std::size_t(x.shape[1]) * std::size_t(x.shape[2]);
            for (std::size_t p = 0; p < plane; ++p) {
                double mu = 0.0;
                for (int c = 0; c < C; ++c) mu += x.data[std::size_t(c) * plane + p];
                mu /= C;
                double var = 0.0;
                for (int c = 0; c < C; ++c) {
                    double dch = x.data[std::size_t(c) * plane + p] - mu;
                    var += dch * dch;
                }
                var /= C;
                double inv = 1.0 / std::sqrt(var + double(n.eps));
                for (int c = 0; c < C; ++c)
                    n.val.data[std::size_t(c) * plane + p] =
                        float((x.data[std::size_t(c) * plane + p] - mu) * inv);
            }
            return;
        }

        case Op::MeanPool: {
            const Tensor& x = nodes_[std::size_t(n.args[0])].val;
            if (x.shape.size() != 3)
                throw std::invalid_argument(node_err(id,
                                                     "mean pool input must be CHW"));
            if (n.val.shape.empty()) n.val = Tensor({x.shape[0]});
            std::size_t plane = std::size_t(x.shape[1]) * std::size_t(x.shape[2]);
            for (int c = 0; c < int(x.shape[0]); ++c) {
                const float* xp = x.data.data() + std::size_t(c) * plane;
                double s = 0.0;
                for (std::size_t i = 0; i < plane; ++i) s += xp[i];
                n.val.data[std::size_t(c)] = float(s / double(plane));
            }
            return;
        }

        case Op::Affine: {
            const Tensor& x = nodes_[std::size_t(n.args[0])].val;
            const Tensor& wgt = nodes_[std::size_t(n.args[1])].val;
            const Tensor& b = nodes_[std::size_t(n.args[2])].val;
            if (x.shape.size() != 1 || wgt.shape.size() != 2 || b.shape.size() != 1 ||
                wgt.shape[1] != x.shape[0] || wgt.shape[0] != b.shape[0])
                throw std::invalid_argument(node_err(id,
                                                     "affine head shape mismatch"));
            if (n.val.shape.empty()) n.val = Tensor({wgt.shape[0]});
            int M = int(wgt.shape[0]), K = int(x.shape[0]);
            for (int m = 0; m < M; ++m) {
                double s = b.data[std::size_t(m)];
                const float* wr = wgt.data.data() + std::size_t(m) * K;
                for (int k = 0; k < K; ++k) s += double(wr[k]) * double(x.data[std::size_t(k)]);
                n.val.data[std::size_t(m)] = float(s);
            }
            return;
        }

        case Op::Sum: {
            const Tensor& x = nodes_[std::size_t(n.args[0])].val;
            if (n.val.shape.empty()) n.val = Tensor({1});
            double s = 0.0;
            for (float v : x.data) s += v;
            n.val.data[0] = float(s);
            return;
        }

        case Op::Sigmoid:
        case Op::Log:
        case Op::Relu:
        case Op::LogSigmoid: {
            const Tensor& x = nodes_[std::size_t(n.args[0])].val;
            if (n.val.shape.empty()) n.val = Tensor(x.shape);
            for (std::size_t i = 0; i < x.data.size(); ++i) {
                double v = x.data[i];
                double r;
                if (n.op == Op::Sigmoid) r = stable_sigmoid(v);
                else if (n.op == Op::Log) r = std::log(v);
                else if (n.op == Op::Relu) r = v > 0.0 ? v : 0.0;
                else r = stable_logsigmoid(v);
                n.val.data[i] = float(r);
            }
            return;
        }
    }
    throw std::logic_error("unhandled op");
}

void Graph::propagate(Node& n, int id) {
    auto aval = [&](int k) -> const Tensor& { return nodes_[std::size_t(n.args[k])].val; };
    auto atracked = [&](int k) { return nodes_[std::size_t(n.args[k])].requires_grad; };
    auto agrad = [&](int k) -> Tensor& { return nodes_[std::size_t(n.args[k])].grad; };
    const Tensor& dy = n.grad;

    switch (n.op) {
        case Op::Input:
            return;

        case Op::Conv2d: {
            const Tensor& x = aval(0);
            const Tensor& wgt = aval(1);
            const Tensor& b = aval(2);
            ConvDims d = conv_dims(id, x, wgt, b, n.stride, n.pad, n.groups);

            if (atracked(0)) {
                std::vector<double> dx(x.data.size(), 0.0);
                for (int oc = 0; oc < d.oc; ++oc) {
                    int g = oc / d.ocg;
                    const float* dyc = dy.data.data() + std::size_t(oc) * d.oh * d.ow;
                    for (int icg = 0; icg < d.icg; ++icg) {
                        int ic = g * d.icg + icg;
                        double* dxc = dx.data() + std::size_t(ic) * d.h * d.w;
                        for (int ky = 0; ky < d.kh; ++ky)
                            for (int kx = 0; kx < d.kw; ++kx) {
                                double wv = wgt.data[((std::size_t(oc) * d.icg + icg) * d.kh + ky) * d.kw + kx];
                                if (wv == 0.0) continue;
                                int lo, hi;
                                ox_range(kx, n.pad, n.stride, d.w, d.ow, lo, hi);
                                int shift = kx - n.pad;
                                for (int oy = 0; oy < d.oh; ++oy) {
                                    int iy = oy * n.stride + ky - n.pad;
                                    if (iy < 0 || iy >= d.h) continue;
                                    const float* dyrow = dyc + std::size_t(oy) * d.ow;
                                    double* dxrow = dxc + std::size_t(iy) * d.w;
                                    if (n.stride == 1) {
                                        double* dxs = dxrow + shift;
                                        for (int ox = lo; ox <= hi; ++ox) dxs[ox] += wv * dyrow[ox];
                                    } else {
                                        for (int ox = lo; ox <= hi; ++ox)
                                            dxrow[ox * n.stride + shift] += wv * dyrow[ox];
                                    }
                                }
                            }
                    }
                }
                Tensor& gx = agrad(0);
                for (std::size_t i = 0; i < dx.size(); ++i) gx.data[i] += float(dx[i]);
            }

            if (atracked(1)) {
                Tensor& gw = agrad(1);
                for (int oc = 0; oc < d.oc; ++oc) {
                    int g = oc / d.ocg;
                    const float* dyc = dy.data.data() + std::size_t(oc) * d.oh * d.ow;
                    for (int icg = 0; icg < d.icg; ++icg) {
                        int ic = g * d.icg + icg;
                        const float* xc = x.data.data() + std::size_t(ic) * d.h * d.w;
                        for (int ky = 0; ky < d.kh; ++ky)
                            for (int kx = 0; kx < d.kw; ++kx) {
                                int lo, hi;
                                ox_range(kx, n.pad, n.stride, d.w, d.ow, lo, hi);
                                int shift = kx - n.pad;
                                double s = 0.0;
                                for (int oy = 0; oy < d.oh; ++oy) {
                                    int iy = oy * n.stride + ky - n.pad;
                                    if (iy < 0 || iy >= d.h) continue;
                                    const float* dyrow = dyc + std::size_t(oy) * d.ow;
                                    const float* xrow = xc + std::size_t(iy) * d.w;
                                    if (n.stride == 1) {
                                        const float* xs = xrow + shift;
                                        for (int ox = lo; ox <= hi; ++ox)
                                            s += double(dyrow[ox]) * double(xs[ox]);
                                    } else {
                                        for (int ox = lo; ox <= hi; ++ox)
                                            s += double(dyrow[ox]) * double(xrow[ox * n.stride + shift]);
                                    }
                                }
                                gw.data[((std::size_t(oc) * d.icg + icg) * d.kh + ky) * d.kw + kx] += float(s);
                            }
                    }
                }
            }

            if (atracked(2)) {
                Tensor& gb = agrad(2);
                for (int oc = 0; oc < d.oc; ++oc) {
                    const float* dyc = dy.data.data() + std::size_t(oc) * d.oh * d.ow;
                    double s = 0.0;
                    for (int i = 0; i < d.oh * d.ow; ++i) s += dyc[std::size_t(i)];
                    gb.data[std::size_t(oc)] += float(s);
                }
            }
            return;
        }

        case Op::Add:
        case Op::Sub: {
            for (int k = 0; k < 2; ++k) {
                if (!atracked(k)) continue;
                Tensor& g = agrad(k);
                float sgn = (n.op == Op::Sub && k == 1) ? -1.0f : 1.0f;
                for (std::size_t i = 0; i < dy.data.size(); ++i) g.data[i] += sgn * dy.data[i];
            }
            return;
        }

        case Op::Mul: {
            for (int k = 0; k < 2; ++k) {
                if (!atracked(k)) continue;
                Tensor& g = agrad(k);
                const Tensor& other = aval(1 - k);
                for (std::size_t i = 0; i < dy.data.size(); ++i)
                    g.data[i] += dy.data[i] * other.data[i];
            }
            return;
        }

        case Op::Scale: {
            if (!atracked(0)) return;
            Tensor& g = agrad(0);
            for (std::size_t i = 0; i < dy.data.size(); ++i) g.data[i] += n.scalar * dy.data[i];
            return;
        }

        case Op::SiLU: {
            if (!atracked(0)) return;
            const Tensor& x = aval(0);
            Tensor& g = agrad(0);
            for (std::size_t i = 0; i < dy.data.size(); ++i) {
                double v = x.data[i];
                double s = stable_sigmoid(v);
                g.data[i] += float(double(dy.data[i]) * s * (1.0 + v * (1.0 - s)));
            }
            return;
        }

        case Op::ChanAffine: {
            const Tensor& x = aval(0);
            const Tensor& gam = aval(1);
            std::size_t plane = std::size_t(x.shape[1]) * std::size_t(x.shape[2]);
            if (atracked(0)) {
                Tensor& g = agrad(0);
                for (int c = 0; c < int(x.shape[0]); ++c) {
                    float gc = gam.data[std::size_t(c)];
                    const float* dp = dy.data.data() + std::size_t(c) * plane;
                    float* gp = g.data.data() + std::size_t(c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) gp[i] += gc * dp[i];
                }
            }
            if (atracked(1)) {
                Tensor& g = agrad(1);
                for (int c = 0; c < int(x.shape[0]); ++c) {
                    const float* dp = dy.data.data() + std::size_t(c) * plane;
                    const float* xp = x.data.data() + std::size_t(c) * plane;
                    double s = 0.0;
                    for (std::size_t i = 0; i < plane; ++i) s += double(dp[i]) * double(xp[i]);
                    g.data[std::size_t(c)] += float(s);
                }
            }
            if (atracked(2)) {
                Tensor& g = agrad(2);
                for (int c = 0; c < int(x.shape[0]); ++c) {
                    const float* dp = dy.data.data() + std::size_t(c) * plane;
                    double s = 0.0;
                    for (std::size_t i = 0; i < plane; ++i) s += dp[i];
                    g.data[std::size_t(c)] += float(s);
                }
            }
            return;
        }

        case Op::LayerNormCh: {
            if (!atracked(0)) return;
            const Tensor& x = aval(0);
            const Tensor& y = n.val;
            Tensor& g = agrad(0);
            int C = int(x.shape[0]);
            std::size_t plane = std::size_t(x.shape[1]) * std::size_t(x.shape[2]);
            for (std::size_t p = 0; p < plane; ++p) {
                double mu = 0.0;
                for (int c = 0; c < C; ++c) mu += x.data[std::size_t(c) * plane + p];
                mu /= C;
                double var = 0.0;
                for (int c = 0; c < C; ++c) {
                    double dch = x.data[std::size_t(c) * plane + p] - mu;
                    var += dch * dch;
                }
                var /= C;
                double inv = 1.0 / std::sqrt(var + double(n.eps));
                double mean_dy = 0.0, mean_dyy = 0.0;
                for (int c = 0; c < C; ++c) {
                    double dv = dy.data[std::size_t(c) * plane + p];
                    mean_dy += dv;
                    mean_dyy += dv * double(y.data[std::size_t(c) * plane + p]);
                }
                mean_dy /= C;
                mean_dyy /= C;
                for (int c = 0; c < C; ++c) {
                    double dv = dy.data[std::size_t(c) * plane + p];
                    double yv = y.data[std::size_t(c) * plane + p];
                    g.data[std::size_t(c) * plane + p] +=
                        float(inv * (dv - mean_dy - yv * mean_dyy));
                }
            }
            return;
        }

        case Op::MeanPool: {
            if (!atracked(0)) return;
            const Tensor& x = aval(0);
            Tensor& g = agrad(0);
            std::size_t plane = std::size_t(x.shape[1]) * std::size_t(x.shape[2]);
            for (int c = 0; c < int(x.shape[0]); ++c) {
                float dv = dy.data[std::size_t(c)] / float(plane);
                float* gp = g.data.data() + std::size_t(c) * plane;
                for (std::size_t i = 0; i < plane; ++i) gp[i] += dv;
            }
            return;
        }

        case Op::Affine: {
            const Tensor& x = aval(0);
            const Tensor& wgt = aval(1);
            int M = int(wgt.shape[0]), K = int(x.shape[0]);
            if (atracked(0)) {
                Tensor& g = agrad(0);
                for (int k = 0; k < K; ++k) {
                    double s = 0.0;
                    for (int m = 0; m < M; ++m)
                        s += double(dy.data[std::size_t(m)]) * double(wgt.data[std::size_t(m) * K + k]);
                    g.data[std::size_t(k)] += float(s);
                }
            }
            if (atracked(1)) {
                Tensor& g = agrad(1);
                for (int m = 0; m < M; ++m)
                    for (int k = 0; k < K; ++k)
                        g.data[std::size_t(m) * K + k] +=
                            dy.data[std::size_t(m)] * x.data[std::size_t(k)];
            }
            if (atracked(2)) {
                Tensor& g = agrad(2);
                for (int m = 0; m < M; ++m) g.data[std::size_t(m)] += dy.data[std::size_t(m)];
            }
            return;
        }

        case Op::Sum: {
            if (!atracked(0)) return;
            Tensor& g = agrad(0);
            float dv = dy.data[0];
            for (float& v : g.data) v += dv;
            return;
        }

        case Op::Sigmoid: {
            if (!atracked(0)) return;
            Tensor& g = agrad(0);
            for (std::size_t i = 0; i < dy.data.size(); ++i) {
                double s = n.val.data[i];
                g.data[i] += float(double(dy.data[i]) * s * (1.0 - s));
            }
            return;
        }

        case Op::Log: {
            if (!atracked(0)) return;
            const Tensor& x = aval(0);
            Tensor& g = agrad(0);
            for (std::size_t i = 0; i < dy.data.size(); ++i)
                g.data[i] += float(double(dy.data[i]) / double(x.data[i]));
            return;
        }

        case Op::Relu: {
            // subgradient at the kink is 0 by convention
            if (!atracked(0)) return;
            const Tensor& x = aval(0);
            Tensor& g = agrad(0);
            for (std::size_t i = 0; i < dy.data.size(); ++i)
                if (x.data[i] > 0.0f) g.data[i] += dy.data[i];
            return;
        }

        case Op::LogSigmoid: {
            if (!atracked(0)) return;
            const Tensor& x = aval(0);
            Tensor& g = agrad(0);
            for (std::size_t i = 0; i < dy.data.size(); ++i)
                g.data[i] += float(double(dy.data[i]) * stable_sigmoid(-double(x.data[i])));
            return;
        }
    }
    throw std::logic_error("unhandled op in backward");
}

} // namespace wmforge::nd
