#include "uedhvac/nn.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace uedhvac::nn {

Network make_network(int input, const std::vector<int>& hidden, int output, double dropout_p,
                     std::uint64_t seed) {
    if (input <= 0 || output <= 0) throw std::invalid_argument("network dims must be positive");
    for (int h : hidden)
        if (h <= 0) throw std::invalid_argument("hidden widths must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
        throw std::invalid_argument("dropout_p must lie in [0, 1)");

    Network net;
    net.dropout_p = dropout_p;
    std::mt19937_64 rng(seed);
    int prev = input;
    std::vector<int> widths = hidden;
    widths.push_back(output);
    for (int w : widths) {
        Layer l;
        l.in = prev;
        l.out = w;
        l.w.resize(static_cast<std::size_t>(prev) * w);
        l.b.resize(w);
        const double bound = 1.0 / std::sqrt(static_cast<double>(prev));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto& v : l.w) v = u(rng);
        for (auto& v : l.b) v = u(rng);
        net.layers.push_back(std::move(l));
        prev = w;
    }
    return net;
}

DropoutMask draw_mask(const Network& net, double p, std::mt19937_64& rng) {
    DropoutMask m;
    m.keep.resize(net.hidden_units());
    std::bernoulli_distribution drop(p);
    for (auto& k : m.keep) k = drop(rng) ? 0 : 1;
    return m;
}

DropoutMask full_mask(const Network& net) {
    DropoutMask m;
    m.keep.assign(net.hidden_units(), 1);
    return m;
}

void forward(const Network& net, std::span<const double> x, const std::uint8_t* mask,
             double scale, Workspace& ws) {
    const std::size_t L = net.layers.size();
    if (L == 0) throw std::logic_error("empty network");
    if (static_cast<int>(x.size()) != net.input_dim())
        throw std::invalid_argument("input size mismatch");
    ws.z.resize(L);
    ws.h.resize(L);

    const double* in = x.data();
    int mask_off = 0;
    for (std::size_t l = 0; l < L; ++l) {
        const Layer& ly = net.layers[l];
        auto& z = ws.z[l];
        auto& h = ws.h[l];
        z.assign(ly.out, 0.0);
        for (int i = 0; i < ly.in; ++i) {
            const double xi = in[i];
            if (xi == 0.0) continue;
            const double* wrow = &ly.w[static_cast<std::size_t>(i) * ly.out];
            for (int j = 0; j < ly.out; ++j) z[j] += xi * wrow[j];
        }
        for (int j = 0; j < ly.out; ++j) z[j] += ly.b[j];

        h.resize(ly.out);
        if (l + 1 < L) {
            for (int j = 0; j < ly.out; ++j) {
                double a = z[j] > 0.0 ? z[j] : 0.0;
                if (mask) a = mask[mask_off + j] ? a * scale : 0.0;
                h[j] = a;
            }
            mask_off += ly.out;
        } else {
            h = z;
        }
        in = h.data();
    }
}

std::vector<double> forward(const Network& net, std::span<const double> x,
                            const std::uint8_t* mask, double scale) {
    Workspace ws;
    forward(net, x, mask, scale, ws);
    return ws.h.back();
}

void GradientBundle::init_like(const Network& net) {
    dw.resize(net.layers.size());
    db.resize(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        dw[l].assign(net.layers[l].w.size(), 0.0);
        db[l].assign(net.layers[l].b.size(), 0.0);
    }
    dinput.assign(net.input_dim(), 0.0);
}

void GradientBundle::set_zero() {
    for (auto& v : dw) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : db) std::fill(v.begin(), v.end(), 0.0);
    std::fill(dinput.begin(), dinput.end(), 0.0);
}

void GradientBundle::add_scaled(const GradientBundle& other, double s) {
    for (std::size_t l = 0; l < dw.size(); ++l) {
        for (std::size_t i = 0; i < dw[l].size(); ++i) dw[l][i] += s * other.dw[l][i];
        for (std::size_t i = 0; i < db[l].size(); ++i) db[l][i] += s * other.db[l][i];
    }
    for (std::size_t i = 0; i < dinput.size(); ++i) dinput[i] += s * other.dinput[i];
}

void backward(const Network& net, std::span<const double> x, const std::uint8_t* mask,
              double scale, const Workspace& ws, std::span<const double> upstream,
              GradientBundle& out, bool accumulate) {
    const std::size_t L = net.layers.size();
    if (ws.z.size() != L || ws.h.size() != L)
        throw std::invalid_argument("workspace does not match network");
    if (static_cast<int>(upstream.size()) != net.output_dim())
        throw std::invalid_argument("upstream size mismatch");
    if (out.dw.size() != L) out.init_like(net);
    if (!accumulate) out.set_zero();

    std::vector<double> delta(upstream.begin(), upstream.end());
    std::vector<double> next;
    int mask_off = net.hidden_units();
    for (std::size_t l = L; l-- > 0;) {
        const Layer& ly = net.layers[l];
        if (l + 1 < L) {
            // h = scale * mask * relu(z): gate the incoming dL/dh.
            mask_off -= ly.out;
            for (int j = 0; j < ly.out; ++j) {
                double g = ws.z[l][j] > 0.0 ? delta[j] : 0.0;
                if (mask) g = mask[mask_off + j] ? g * scale : 0.0;
                delta[j] = g;
            }
        }
        const double* in = (l == 0) ? x.data() : ws.h[l - 1].data();
        auto& dw = out.dw[l];
        auto& db = out.db[l];
        for (int j = 0; j < ly.out; ++j) db[j] += delta[j];
        for (int i = 0; i < ly.in; ++i) {
            const double xi = in[i];
            double* drow = &dw[static_cast<std::size_t>(i) * ly.out];
            const double* wrow = &ly.w[static_cast<std::size_t>(i) * ly.out];
            double acc = 0.0;
            for (int j = 0; j < ly.out; ++j) {
                drow[j] += xi * delta[j];
                acc += wrow[j] * delta[j];
            }
            if (l == 0)
                out.dinput[i] += acc;
            else {
                if (next.size() != static_cast<std::size_t>(ly.in)) next.assign(ly.in, 0.0);
                next[i] = acc;
            }
        }
        if (l > 0) delta = next;
    }
}

void AdamState::init_like(const Network& net) {
    const std::size_t L = net.layers.size();
    mw.resize(L);
    vw.resize(L);
    mb.resize(L);
    vb.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        mw[l].assign(net.layers[l].w.size(), 0.0);
        vw[l].assign(net.layers[l].w.size(), 0.0);
        mb[l].assign(net.layers[l].b.size(), 0.0);
        vb[l].assign(net.layers[l].b.size(), 0.0);
    }
    t = 0;
}

namespace {

void adam_tensor(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                 std::vector<double>& v, double lr, double b1, double b2, double eps, double c1,
                 double c2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
}

}  // namespace

void adam_update(Network& net, const GradientBundle& grads, AdamState& state, double lr,
                 double beta1, double beta2, double eps) {
    if (state.mw.size() != net.layers.size()) state.init_like(net);
    state.t += 1;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        adam_tensor(net.layers[l].w, grads.dw[l], state.mw[l], state.vw[l], lr, beta1, beta2, eps,
                    c1, c2);
        adam_tensor(net.layers[l].b, grads.db[l], state.mb[l], state.vb[l], lr, beta1, beta2, eps,
                    c1, c2);
    }
}

namespace {

constexpr char kFormatName[] = "uedhvac-net";
constexpr int kFormatVersion = 1;

void put_f32_le(std::string& buf, double v) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    buf.push_back(static_cast<char>(bits & 0xff));
    buf.push_back(static_cast<char>((bits >> 8) & 0xff));
    buf.push_back(static_cast<char>((bits >> 16) & 0xff));
    buf.push_back(static_cast<char>((bits >> 24) & 0xff));
}

double get_f32_le(const unsigned char* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    return static_cast<double>(std::bit_cast<float>(bits));
}

}  // namespace

void save_network(const Network& net, const std::string& path,
                  const nlohmann::ordered_json& extra) {
    nlohmann::ordered_json header;
    header["format"] = kFormatName;
    header["version"] = kFormatVersion;
    header["dtype"] = "f32le";
    header["dropout_p"] = net.dropout_p;
    auto shapes = nlohmann::ordered_json::array();
    for (const auto& l : net.layers) shapes.push_back({{"in", l.in}, {"out", l.out}});
    header["layers"] = shapes;
    if (!extra.empty()) header["extra"] = extra;

    std::string payload;
    std::size_t n = 0;
    for (const auto& l : net.layers) n += l.w.size() + l.b.size();
    payload.reserve(n * 4);
    for (const auto& l : net.layers) {
        for (double v : l.w) put_f32_le(payload, v);
        for (double v : l.b) put_f32_le(payload, v);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f << header.dump() << '\n';
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

LoadedNetwork load_network(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("checkpoint missing header: " + path);

    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object())
        throw std::runtime_error("checkpoint header is not valid JSON: " + path);
    if (header.value("format", "") != kFormatName)
        throw std::runtime_error("not a network checkpoint: " + path);
    if (header.value("version", -1) != kFormatVersion)
        throw std::runtime_error("unsupported checkpoint version in " + path);
    if (header.value("dtype", "") != "f32le")
        throw std::runtime_error("unsupported checkpoint dtype in " + path);
    if (!header.contains("layers") || !header["layers"].is_array() || header["layers"].empty())
        throw std::runtime_error("checkpoint shape manifest missing in " + path);

    LoadedNetwork out;
    out.net.dropout_p = header.value("dropout_p", 0.0);
    int prev = -1;
    std::size_t expect = 0;
    for (const auto& s : header["layers"]) {
        Layer l;
        l.in = s.value("in", 0);
        l.out = s.value("out", 0);
        if (l.in <= 0 || l.out <= 0)
            throw std::runtime_error("checkpoint manifest has invalid shape in " + path);
        if (prev >= 0 && l.in != prev)
            throw std::runtime_error("checkpoint manifest layers do not chain in " + path);
        prev = l.out;
        expect += static_cast<std::size_t>(l.in) * l.out + l.out;
        out.net.layers.push_back(std::move(l));
    }
    if (header.contains("extra")) out.extra = header["extra"];

    std::string payload((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (payload.size() != expect * 4) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "checkpoint payload is %zu bytes, manifest expects %zu: ", payload.size(),
                      expect * 4);
        throw std::runtime_error(msg + path);
    }
    const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
    for (auto& l : out.net.layers) {
        l.w.resize(static_cast<std::size_t>(l.in) * l.out);
        l.b.resize(l.out);
        for (auto& v : l.w) {
            v = get_f32_le(p);
            p += 4;
        }
        for (auto& v : l.b) {
            v = get_f32_le(p);
            p += 4;
        }
    }
    return out;
}

}  // namespace uedhvac::nn
