#include <catch2/catch_amalgamated.hpp>

#include "gapcheck/identify.hpp"

using namespace gapcheck;

namespace {

QAInstance metallica_instance() {
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

} // namespace

TEST_CASE("identify prompt embeds question and passages verbatim", "[identify][prompt]") {
    const auto reg = TemplateRegistry::builtin();
    const auto messages = build_identify_prompt(metallica_instance(), reg);
    std::string all;
    for (const auto& m : messages) all += m.text + "\n";
    CHECK(all.find("How much did Metallica earn from their 2004 tour?") != std::string::npos);
    CHECK(all.find("thanks to their Madly in Anger with the World tour.") != std::string::npos);
}

TEST_CASE("identify prompt contains exactly one verdict instruction block", "[identify][prompt]") {
    const auto reg = TemplateRegistry::builtin();
    const auto messages = build_identify_prompt(metallica_instance(), reg);
    std::string all;
    for (const auto& m : messages) all += m.text + "\n";
    size_t count = 0, pos = 0;
    const std::string marker = "VERDICT: GAP or NO_GAP";
    while ((pos = all.find(marker, pos)) != std::string::npos) {
        ++count;
        pos += marker.size();
    }
    CHECK(count == 1);
}

TEST_CASE("identify prompt requires at least one passage", "[identify][prompt]") {
    auto inst = metallica_instance();
    inst.passages.clear();
    const auto reg = TemplateRegistry::builtin();
    CHECK_THROWS_AS(build_identify_prompt(inst, reg), ContractViolation);
}

TEST_CASE("unknown template id raises TemplateNotFound", "[identify][prompt]") {
    const auto reg = TemplateRegistry::builtin();
    CHECK_THROWS_AS(build_identify_prompt(metallica_instance(), reg, "identify/v999"), TemplateNotFound);
}

TEST_CASE("parse_hypothesis handles the structured two-line form", "[identify][parse]") {
    const auto h = parse_hypothesis(
        "VERDICT: GAP\nMISSING: The context does not specify how much came solely from their tour.", 0);
    CHECK(h.polarity == Polarity::gap);
    CHECK(h.gap_statement == "The context does not specify how much came solely from their tour.");
    CHECK(h.sample_index == 0);
}

TEST_CASE("parse_hypothesis handles NO_GAP with literal NONE", "[identify][parse]") {
    const auto h = parse_hypothesis("VERDICT: NO_GAP\nMISSING: NONE", 2);
    CHECK(h.polarity == Polarity::no_gap);
    CHECK(h.gap_statement.empty());
    CHECK(h.sample_index == 2);
}

TEST_CASE("parse_hypothesis tolerates prose and case", "[identify][parse]") {
    const auto h =
        parse_hypothesis("Sure! VERDICT: gap\nMISSING: the release year of the film\nHope that helps.", 1);
    CHECK(h.polarity == Polarity::gap);
    CHECK(h.gap_statement == "the release year of the film");
}

TEST_CASE("parse_hypothesis trims multi-sentence claims to one sentence", "[identify][parse]") {
    const auto h = parse_hypothesis("VERDICT: GAP\nMISSING: The date is missing. Also the place is unknown.", 0);
    CHECK(h.gap_statement == "The date is missing.");
}

TEST_CASE("parse_hypothesis raises ParseError without a verdict line", "[identify][parse]") {
    CHECK_THROWS_AS(parse_hypothesis("I think the context is fine, nothing to add.", 0), ParseError);
}

TEST_CASE("GAP verdict with NONE missing line falls back to the raw reply", "[identify][parse]") {
    const auto h = parse_hypothesis("VERDICT: GAP\nMISSING: NONE", 0);
    CHECK(h.polarity == Polarity::gap);
    CHECK_FALSE(h.gap_statement.empty()); // invariant: GAP implies a claim
}

TEST_CASE("generate_hypotheses returns exactly n_samples in order", "[identify][generate]") {
    MockScript script;
    for (int i = 0; i < 5; ++i)
        script.reply_for_sample("Metallica", i, "VERDICT: GAP\nMISSING: claim number " + std::to_string(i) + ".");
    Gateway gateway(std::make_shared<MockBackend>(script));
    IdentifyConfig cfg;
    cfg.model_id = "m";
    const auto reg = TemplateRegistry::builtin();

    const auto hyps = generate_hypotheses(metallica_instance(), cfg, gateway, reg);
    REQUIRE(hyps.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(hyps[static_cast<size_t>(i)].sample_index == i);
        CHECK(hyps[static_cast<size_t>(i)].gap_statement == "claim number " + std::to_string(i) + ".");
    }
}

TEST_CASE("generate_hypotheses preserves the scripted polarity multiset", "[identify][generate]") {
    MockScript script;
    script.reply_for_sample("Metallica", 0, "VERDICT: GAP\nMISSING: tour-only earnings unspecified.");
    script.reply_for_sample("Metallica", 1, "VERDICT: NO_GAP\nMISSING: NONE");
    script.reply_for_sample("Metallica", 2, "VERDICT: GAP\nMISSING: the tour share of earnings.");
    script.reply_for_sample("Metallica", 3, "VERDICT: NO_GAP\nMISSING: NONE");
    script.reply_for_sample("Metallica", 4, "VERDICT: GAP\nMISSING: how much came from the tour alone.");
    Gateway gateway(std::make_shared<MockBackend>(script));
    IdentifyConfig cfg;
    cfg.model_id = "m";
    const auto reg = TemplateRegistry::builtin();

    const auto hyps = generate_hypotheses(metallica_instance(), cfg, gateway, reg);
    int gap = 0, no_gap = 0;
    for (const auto& h : hyps) (h.polarity == Polarity::gap ? gap : no_gap)++;
    CHECK(gap == 3);
    CHECK(no_gap == 2);
}

TEST_CASE("mixed sufficiency reasoning across runs yields mixed polarities", "[identify][generate]") {
    // Alternating insufficient/sufficient reasoning styles across draws: the
    // instability that motivates sampling more than once.
    MockScript script;
    script.reply_for_sample("Metallica", 0,
                            "The context mentions total 2004 earnings. VERDICT: GAP\nMISSING: it does not specify "
                            "how much came solely from their tour.");
    script.reply_for_sample("Metallica", 1,
                            "It explicitly states the tour drove the earnings. VERDICT: NO_GAP\nMISSING: NONE");
    script.reply_for_sample("Metallica", 2,
                            "VERDICT: GAP\nMISSING: the share of earnings attributable to the tour.");
    IdentifyConfig cfg;
    cfg.n_samples = 3;
    cfg.model_id = "m";
    Gateway gateway(std::make_shared<MockBackend>(script));
    const auto reg = TemplateRegistry::builtin();

    const auto hyps = generate_hypotheses(metallica_instance(), cfg, gateway, reg);
    REQUIRE(hyps.size() == 3);
    CHECK(hyps[0].polarity == Polarity::gap);
    CHECK(hyps[1].polarity == Polarity::no_gap);
    CHECK(hyps[2].polarity == Polarity::gap);
}

TEST_CASE("unparseable sample retries once as a fresh draw", "[identify][generate]") {
    MockScript script;
    script.reply_for_sample("Metallica", 0, "mumbling with no structure");
    script.reply_for_sample("Metallica", 3, "VERDICT: NO_GAP\nMISSING: NONE"); // retry draw: 0 + n_samples
    script.reply_for_sample("Metallica", 1, "VERDICT: GAP\nMISSING: a.");
    script.reply_for_sample("Metallica", 2, "VERDICT: GAP\nMISSING: b.");
    IdentifyConfig cfg;
    cfg.n_samples = 3;
    cfg.model_id = "m";
    Gateway gateway(std::make_shared<MockBackend>(script));
    const auto reg = TemplateRegistry::builtin();

    const auto hyps = generate_hypotheses(metallica_instance(), cfg, gateway, reg);
    REQUIRE(hyps.size() == 3);
    CHECK(hyps[0].polarity == Polarity::no_gap); // rescued by the retry
    CHECK(hyps[0].sample_index == 0);
}

TEST_CASE("still-unparseable samples fall back to GAP with the raw text", "[identify][generate]") {
    MockScript script;
    script.reply_for_sample("Metallica", 0, "free-form rambling, two lines\nof nothing structured");
    script.reply_for_sample("Metallica", 1, "VERDICT: GAP\nMISSING: a.");
    script.reply_for_sample("Metallica", 2, "VERDICT: GAP\nMISSING: b.");
    // no entry for the retry draw (sample_index 3): ScriptMiss falls back
    IdentifyConfig cfg;
    cfg.n_samples = 3;
    cfg.model_id = "m";
    Gateway gateway(std::make_shared<MockBackend>(script));
    const auto reg = TemplateRegistry::builtin();

    const auto hyps = generate_hypotheses(metallica_instance(), cfg, gateway, reg);
    REQUIRE(hyps.size() == 3);
    CHECK(hyps[0].polarity == Polarity::gap);
    CHECK(hyps[0].gap_statement == "free-form rambling, two lines of nothing structured");
}

TEST_CASE("identify config enforces the diversity invariant", "[identify][config]") {
    IdentifyConfig cfg;
    cfg.n_samples = 5;
    cfg.temperature = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ContractViolation);
    cfg.n_samples = 1; // deterministic single sample is allowed
    CHECK_NOTHROW(cfg.validate());
    cfg.n_samples = 0;
    CHECK_THROWS_AS(cfg.validate(), ContractViolation);
}
