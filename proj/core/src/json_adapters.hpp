#pragma once

// Internal JSON (de)serialisation shared by trainer, config and report code.
// Kept out of public headers so the vendored json stays a private dependency.

#include <json.hpp>

#include "eraser/objectives.hpp"
#include "eraser/trainer.hpp"

namespace eraser {

inline void to_json(nlohmann::json& j, const LossBreakdown& b) {
    j = nlohmann::json{{"l_f", b.l_f},     {"l_h", b.l_h},     {"l_r", b.l_r},
                       {"gamma", b.gamma}, {"hinge", b.hinge}, {"total", b.total},
                       {"weights", b.weights}};
}

inline void from_json(const nlohmann::json& j, LossBreakdown& b) {
    j.at("l_f").get_to(b.l_f);
    j.at("l_h").get_to(b.l_h);
    j.at("l_r").get_to(b.l_r);
    j.at("gamma").get_to(b.gamma);
    j.at("hinge").get_to(b.hinge);
    j.at("total").get_to(b.total);
    if (j.contains("weights")) j.at("weights").get_to(b.weights);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{
        {"gamma", c.gamma},
        {"batch_size", c.batch_size},
        {"max_seq_len", c.max_seq_len},
        {"learning_rate", c.learning_rate},
        {"epochs", c.epochs},
        {"adapter_rank", c.adapter_rank},
        {"adapter_alpha", c.adapter_alpha},
        {"weight_decay", c.weight_decay},
        {"variant", variant_name(c.variant)},
        {"term_weights", c.term_weights},
        {"seeds", {{"data", c.seeds.data}, {"augment", c.seeds.augment}, {"init", c.seeds.init}}},
        {"aug_prefix_min", c.aug_prefix_min},
        {"aug_prefix_max", c.aug_prefix_max},
        {"aug_suffix_min", c.aug_suffix_min},
        {"aug_suffix_max", c.aug_suffix_max},
        {"rsft_refusal_target", c.rsft_refusal_target},
    };
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    j.at("gamma").get_to(c.gamma);
    j.at("batch_size").get_to(c.batch_size);
    if (j.contains("max_seq_len")) j.at("max_seq_len").get_to(c.max_seq_len);
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("epochs").get_to(c.epochs);
    if (j.contains("adapter_rank")) j.at("adapter_rank").get_to(c.adapter_rank);
    if (j.contains("adapter_alpha")) j.at("adapter_alpha").get_to(c.adapter_alpha);
    if (j.contains("weight_decay")) j.at("weight_decay").get_to(c.weight_decay);
    if (j.contains("variant")) c.variant = variant_from_name(j.at("variant").get<std::string>());
    if (j.contains("term_weights")) j.at("term_weights").get_to(c.term_weights);
    if (j.contains("seeds")) {
        const auto& s = j.at("seeds");
        s.at("data").get_to(c.seeds.data);
        s.at("augment").get_to(c.seeds.augment);
        s.at("init").get_to(c.seeds.init);
    }
    if (j.contains("aug_prefix_min")) j.at("aug_prefix_min").get_to(c.aug_prefix_min);
    if (j.contains("aug_prefix_max")) j.at("aug_prefix_max").get_to(c.aug_prefix_max);
    if (j.contains("aug_suffix_min")) j.at("aug_suffix_min").get_to(c.aug_suffix_min);
    if (j.contains("aug_suffix_max")) j.at("aug_suffix_max").get_to(c.aug_suffix_max);
    if (j.contains("rsft_refusal_target")) j.at("rsft_refusal_target").get_to(c.rsft_refusal_target);
}

}  // namespace eraser
