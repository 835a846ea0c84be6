#include "eraser/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "binio.hpp"

namespace eraser {

AdamW::AdamW(AdamWConfig cfg, size_t scalar_count)
    : cfg_(cfg), m_(scalar_count, 0.0), v_(scalar_count, 0.0) {}

void AdamW::step(nn::ParamStore& params) {
    if (params.scalar_count() != m_.size()) {
        throw std::invalid_argument("AdamW::step: store size does not match moment buffers");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

    size_t off = 0;
    for (int id = 0; id < params.count(); ++id) {
        nn::Mat& w = params.weights(id);
        const nn::Mat& g = params.grads(id);
        if (!params.trainable(id)) {
            off += w.size();
            continue;
        }
        for (size_t k = 0; k < w.size(); ++k, ++off) {
            const double gk = g.v[k];
            m_[off] = cfg_.beta1 * m_[off] + (1.0 - cfg_.beta1) * gk;
            v_[off] = cfg_.beta2 * v_[off] + (1.0 - cfg_.beta2) * gk * gk;
            const double mhat = m_[off] / bc1;
            const double vhat = v_[off] / bc2;
            w.v[k] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w.v[k]);
        }
    }
}

namespace {
constexpr char kMagic[9] = "ERSROPT1";
}

void AdamW::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    detail::write_magic(out, kMagic);
    detail::write_u64(out, static_cast<uint64_t>(t_));
    detail::write_u64(out, m_.size());
    detail::write_f64s(out, m_);
    detail::write_f64s(out, v_);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

AdamW AdamW::load(AdamWConfig cfg, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    detail::expect_magic(in, kMagic, path.string());
    const auto t = detail::read_u64(in);
    const auto n = detail::read_u64(in);
    AdamW opt(cfg, static_cast<size_t>(n));
    opt.t_ = static_cast<int64_t>(t);
    detail::read_f64s(in, opt.m_);
    detail::read_f64s(in, opt.v_);
    return opt;
}

}  // namespace eraser
