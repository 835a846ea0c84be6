#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "eraser/tape.hpp"

namespace eraser {

// Adam with decoupled weight decay. Moments cover every scalar of the store;
// only trainable entries are updated.
struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

class AdamW {
public:
    AdamW(AdamWConfig cfg, size_t scalar_count);

    void step(nn::ParamStore& params);

    int64_t steps_taken() const { return t_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }

    void save(const std::filesystem::path& path) const;
    static AdamW load(AdamWConfig cfg, const std::filesystem::path& path);

private:
    AdamWConfig cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    int64_t t_ = 0;
};

}  // namespace eraser
