#pragma once

// Scripted end-to-end fixtures shared by the pipeline tests and the
// acceptance suite.

#include <random>
#include <string>
#include <vector>

#include "gapcheck/datasets.hpp"
#include "gapcheck/gateway.hpp"
#include "gapcheck/pipeline.hpp"

namespace fixtures {

using namespace gapcheck;

// Markers that scope mock rules to one pipeline stage.
inline const char* kIdentifyMarker = "What specific information";
inline const char* kVerifyMarker = "Claim about missing information";

inline QAInstance metallica_instance() {
    QAInstance inst;
    inst.id = "metallica-2004";
    inst.question = "How much did Metallica earn from their 2004 tour?";
    Passage p;
    p.id = "p0";
    p.title = "Music industry earnings";
    p.text = "Heavy metal band Metallica saw their 2004 earnings rise to $43.1 million (£23.1 million), "
             "thanks to their Madly in Anger with the World tour.";
    inst.passages = {p};
    inst.label = Label::sufficient;
    inst.source = "fixture";
    return inst;
}

/// Unstable identify draws (3 gap paraphrases + 2 no-gap) with a verifier
/// that locates the tour earnings in the context. Full pipeline: Sufficient;
/// identify-only: Insufficient.
inline void script_metallica(MockScript& script) {
    const std::string q = "How much did Metallica earn from their 2004 tour?";
    script.reply_for({kIdentifyMarker, q}, 0,
                     "VERDICT: GAP\nMISSING: The context does not specify how much came solely from their tour.");
    script.reply_for({kIdentifyMarker, q}, 1, "VERDICT: NO_GAP\nMISSING: NONE");
    script.reply_for({kIdentifyMarker, q}, 2,
                     "VERDICT: GAP\nMISSING: The context does not specify how much came only from their tour.");
    script.reply_for({kIdentifyMarker, q}, 3, "VERDICT: NO_GAP\nMISSING: NONE");
    script.reply_for({kIdentifyMarker, q}, 4,
                     "VERDICT: GAP\nMISSING: The context does not specify how much income came solely from their "
                     "tour.");
    script.reply_for({kVerifyMarker, "from their tour"}, std::nullopt,
                     "FINDING: PRESENT\nEVIDENCE: \"2004 earnings rise to $43.1 million (£23.1 million), "
                     "thanks to their Madly in Anger with the World tour\"");
}

inline QAInstance hilton_instance() {
    QAInstance inst;
    inst.id = "hilton-nomad";
    inst.question = "Will Hilton scale NoMad internationally as quickly as it scaled Canopy and Tempo?";
    Passage p;
    p.id = "p0";
    p.title = "Hotel brand expansion";
    p.text = "Hilton acquired a majority interest in Sydell Group to expand the NoMad brand globally. The "
             "agreement covers development of NoMad hotels worldwide, with the NoMad London flagship described "
             "as a model for future openings.";
    inst.passages = {p};
    inst.label = Label::insufficient;
    inst.source = "fixture";
    return inst;
}

/// Every draw reports the same multi-gap hypothesis (strategies, obstacles,
/// timeline comparison); the verifier finds none of it. Full pipeline:
/// Insufficient with a consensus claim naming all three gaps.
inline void script_hilton(MockScript& script) {
    const std::string q = "Will Hilton scale NoMad internationally";
    const std::vector<std::string> claims = {
        "The context omits specific strategies for scaling NoMad, potential obstacles, and a comparison to "
        "Canopy and Tempo expansion timelines.",
        "It never gives specific strategies for scaling NoMad, potential obstacles, or a comparison to Canopy "
        "and Tempo expansion timelines.",
        "The context omits specific strategies for scaling NoMad, any potential obstacles, and a comparison to "
        "Canopy and Tempo expansion timelines.",
        "Missing are specific strategies for scaling NoMad, potential obstacles, and a comparison to Canopy and "
        "Tempo expansion timelines.",
        "The context omits the specific strategies for scaling NoMad, potential obstacles, and a comparison to "
        "Canopy and Tempo expansion timelines.",
    };
    for (int i = 0; i < 5; ++i)
        script.reply_for({kIdentifyMarker, q}, i, "VERDICT: GAP\nMISSING: " + claims[static_cast<size_t>(i)]);
    script.reply_for({kVerifyMarker, "strategies for scaling NoMad"}, std::nullopt,
                     "FINDING: ABSENT\nEVIDENCE: \"\"");
}

inline PipelineConfig default_pipeline_config(PipelineMode mode = PipelineMode::full) {
    PipelineConfig cfg;
    cfg.identify.model_id = "identify-model";
    cfg.consensus.embedding_model_id = "embed-model";
    cfg.verify_model_id = "verify-model";
    cfg.mode = mode;
    return cfg;
}

// ---------------------------------------------------------------------------
// Randomized scripted scenarios (one-sided flip / RER material)
// ---------------------------------------------------------------------------

enum class Scenario { no_gap_majority, gap_verified_present, gap_verified_absent, incoherent_gaps };

struct RandomBatch {
    std::vector<QAInstance> instances;
    MockScript script;
    std::vector<Scenario> scenarios;
};

/// Builds n scripted instances covering all scenario classes, with gold
/// labels assigned pseudo-randomly. Deterministic for a fixed seed.
inline RandomBatch build_random_batch(int n, unsigned seed) {
    RandomBatch batch;
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> scenario_dist(0, 3);
    std::bernoulli_distribution gold_coin(0.5);

    for (int i = 0; i < n; ++i) {
        const std::string tag = "pj" + std::to_string(i);
        QAInstance inst;
        inst.id = "inst-" + std::to_string(i);
        inst.question = "When did project " + tag + " launch?";
        Passage p;
        p.id = "p0";
        p.text = "Record alpha-" + std::to_string(i) + " states the launch happened. Record beta-" +
                 std::to_string(i) + " adds detail.";
        inst.passages = {p};
        inst.label = gold_coin(rng) ? Label::sufficient : Label::insufficient;
        inst.source = "random-fixture";

        const auto scenario = static_cast<Scenario>(scenario_dist(rng));
        batch.scenarios.push_back(scenario);
        const std::string q_marker = "project " + tag + " launch";

        auto identify_reply = [&](int sample, const std::string& text) {
            batch.script.reply_for({kIdentifyMarker, q_marker}, sample, text);
        };
        switch (scenario) {
            case Scenario::no_gap_majority:
                identify_reply(0, "VERDICT: NO_GAP\nMISSING: NONE");
                identify_reply(1, "VERDICT: GAP\nMISSING: the launch date for project " + tag + " is missing");
                identify_reply(2, "VERDICT: NO_GAP\nMISSING: NONE");
                identify_reply(3, "VERDICT: NO_GAP\nMISSING: NONE");
                identify_reply(4, "VERDICT: GAP\nMISSING: the launch date for project " + tag + " is not given");
                break;
            case Scenario::gap_verified_present:
            case Scenario::gap_verified_absent: {
                identify_reply(0, "VERDICT: GAP\nMISSING: the launch date for project " + tag + " is missing");
                identify_reply(1,
                               "VERDICT: GAP\nMISSING: the launch date for project " + tag + " is missing entirely");
                identify_reply(2, "VERDICT: GAP\nMISSING: the launch date for project " + tag + " is missing here");
                identify_reply(3,
                               "VERDICT: GAP\nMISSING: the exact launch date for project " + tag + " is missing");
                identify_reply(4,
                               "VERDICT: GAP\nMISSING: the launch date for project " + tag + " is missing again");
                // " is" suffix keeps pj1 from shadowing pj11 in rule order
                if (scenario == Scenario::gap_verified_present) {
                    batch.script.reply_for({kVerifyMarker, "project " + tag + " is"}, std::nullopt,
                                           "FINDING: PRESENT\nEVIDENCE: \"Record alpha-" + std::to_string(i) +
                                               " states the launch happened.\"");
                } else {
                    batch.script.reply_for({kVerifyMarker, "project " + tag + " is"}, std::nullopt,
                                           "FINDING: ABSENT\nEVIDENCE: \"\"");
                }
                break;
            }
            case Scenario::incoherent_gaps:
                identify_reply(0, "VERDICT: GAP\nMISSING: quorum rules alpha" + std::to_string(i));
                identify_reply(1, "VERDICT: GAP\nMISSING: vendor pricing beta" + std::to_string(i));
                identify_reply(2, "VERDICT: GAP\nMISSING: staffing charts gamma" + std::to_string(i));
                identify_reply(3, "VERDICT: GAP\nMISSING: weather impact delta" + std::to_string(i));
                identify_reply(4, "VERDICT: GAP\nMISSING: legal posture epsilon" + std::to_string(i));
                break;
        }
        batch.instances.push_back(std::move(inst));
    }
    return batch;
}

} // namespace fixtures
