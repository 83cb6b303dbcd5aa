#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "gapcheck/eval.hpp"
#include "gapcheck/report.hpp"

#include "support/fixtures.hpp"

using namespace gapcheck;
namespace fs = std::filesystem;

namespace {

SufficiencyVerdict verdict_of(const std::string& id, Label label, const std::string& system = "ours") {
    SufficiencyVerdict v;
    v.instance_id = id;
    v.system = system;
    v.label = label;
    return v;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("accuracy over exact label matches", "[eval][accuracy]") {
    GoldLabels gold;
    std::vector<SufficiencyVerdict> verdicts;
    SECTION("all correct is 100%") {
        for (int i = 0; i < 4; ++i) {
            const std::string id = "i" + std::to_string(i);
            gold[id] = i % 2 ? Label::sufficient : Label::insufficient;
            verdicts.push_back(verdict_of(id, gold[id]));
        }
        const auto result = accuracy(verdicts, gold);
        CHECK(result.accuracy_pct == 100.0);
        CHECK(result.confusion.tp == 2);
        CHECK(result.confusion.tn == 2);
    }
    SECTION("7 of 10 correct is 70% with a consistent confusion table") {
        // gold: 5 insufficient (i0..i4), 5 sufficient (i5..i9)
        for (int i = 0; i < 10; ++i) gold["i" + std::to_string(i)] = i < 5 ? Label::insufficient : Label::sufficient;
        // wrong on i0 (pred sufficient), i5, i6 (pred insufficient)
        for (int i = 0; i < 10; ++i) {
            Label pred = gold["i" + std::to_string(i)];
            if (i == 0) pred = Label::sufficient;
            if (i == 5 || i == 6) pred = Label::insufficient;
            verdicts.push_back(verdict_of("i" + std::to_string(i), pred));
        }
        const auto result = accuracy(verdicts, gold);
        CHECK(result.accuracy_pct == Catch::Approx(70.0).margin(1e-12));
        CHECK(result.confusion.tp == 4);
        CHECK(result.confusion.fn == 1);
        CHECK(result.confusion.fp == 2);
        CHECK(result.confusion.tn == 3);
        CHECK(result.confusion.total() == 10);
    }
    SECTION("missing gold label raises") {
        verdicts.push_back(verdict_of("unknown", Label::sufficient));
        CHECK_THROWS_AS(accuracy(verdicts, gold), MissingGold);
    }
}

TEST_CASE("accuracy is permutation invariant", "[eval][property]") {
    std::mt19937 rng(31337);
    GoldLabels gold;
    std::vector<SufficiencyVerdict> verdicts;
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < 50; ++i) {
        const std::string id = "p" + std::to_string(i);
        gold[id] = coin(rng) ? Label::sufficient : Label::insufficient;
        verdicts.push_back(verdict_of(id, coin(rng) ? Label::sufficient : Label::insufficient));
    }
    const auto base = accuracy(verdicts, gold);
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(verdicts.begin(), verdicts.end(), rng);
        const auto shuffled = accuracy(verdicts, gold);
        REQUIRE(shuffled.accuracy_pct == base.accuracy_pct);
        REQUIRE(shuffled.confusion.tp == base.confusion.tp);
    }
}

TEST_CASE("relative error reduction formula and edge cases", "[eval][rer]") {
    GoldLabels gold;
    std::vector<SufficiencyVerdict> full, io;
    // 20 instances, all gold sufficient; identify-only wrong on 10, full wrong on 7
    for (int i = 0; i < 20; ++i) {
        const std::string id = "r" + std::to_string(i);
        gold[id] = Label::sufficient;
        full.push_back(verdict_of(id, i < 7 ? Label::insufficient : Label::sufficient));
        io.push_back(verdict_of(id, i < 10 ? Label::insufficient : Label::sufficient, "ours-identify-only"));
    }
    const auto rer = relative_error_reduction(full, io, gold);
    REQUIRE(rer.has_value());
    CHECK(*rer == Catch::Approx(30.0).margin(1e-12));

    SECTION("equal error counts give 0%") {
        const auto zero = relative_error_reduction(io, io, gold);
        REQUIRE(zero.has_value());
        CHECK(*zero == 0.0);
    }
    SECTION("no identify-only errors: undefined") {
        std::vector<SufficiencyVerdict> perfect;
        for (int i = 0; i < 20; ++i) perfect.push_back(verdict_of("r" + std::to_string(i), Label::sufficient));
        CHECK_FALSE(relative_error_reduction(perfect, perfect, gold).has_value());
    }
    SECTION("mismatched instance sets are rejected") {
        auto fewer = io;
        fewer.pop_back();
        CHECK_THROWS_AS(relative_error_reduction(full, fewer, gold), MismatchedSets);
    }
    SECTION("RER sign test: positive iff strictly fewer errors") {
        CHECK(*rer > 0.0);
        const auto same = relative_error_reduction(io, io, gold);
        CHECK(*same == 0.0);
    }
}

TEST_CASE("alignment judge parses the rubric score with one retry", "[eval][alignment]") {
    const auto reg = TemplateRegistry::builtin();
    AlignmentConfig cfg;
    cfg.judge_model = "judge";

    SECTION("identical explanations scripted to the rubric top") {
        MockScript script;
        script.reply("Rate how well", "5");
        Gateway gw(std::make_shared<MockBackend>(script));
        CHECK(alignment_judge("the date is missing", "the date is missing", gw, cfg, reg) == 5);
    }
    SECTION("unrelated explanations scripted to the rubric bottom") {
        MockScript script;
        script.reply("Rate how well", "1");
        Gateway gw(std::make_shared<MockBackend>(script));
        CHECK(alignment_judge("the date is missing", "the author is unknown", gw, cfg, reg) == 1);
    }
    SECTION("retry rescues an out-of-range first reply") {
        MockScript script;
        script.reply_for({"Rate how well"}, 0, "7");
        script.reply_for({"Rate how well"}, 1, "score: 4 (mostly aligned)");
        Gateway gw(std::make_shared<MockBackend>(script));
        CHECK(alignment_judge("a", "b", gw, cfg, reg) == 4);
    }
    SECTION("persistent junk raises JudgeParseError") {
        MockScript script;
        script.reply("Rate how well", "no score here");
        Gateway gw(std::make_shared<MockBackend>(script));
        CHECK_THROWS_AS(alignment_judge("a", "b", gw, cfg, reg), JudgeParseError);
    }
    SECTION("empty inputs violate the contract") {
        Gateway gw(std::make_shared<MockBackend>(MockScript{}));
        CHECK_THROWS_AS(alignment_judge("", "b", gw, cfg, reg), ContractViolation);
    }
}

TEST_CASE("judge_alignment scopes to insufficient predictions with gold justifications", "[eval][alignment]") {
    const auto reg = TemplateRegistry::builtin();
    MockScript script;
    script.reply("Rate how well", "4");
    Gateway gw(std::make_shared<MockBackend>(script));
    AlignmentConfig cfg;
    cfg.judge_model = "judge";

    std::vector<QAInstance> instances;
    QAInstance with_just;
    with_just.id = "a";
    with_just.question = "q";
    with_just.passages = {{"p0", std::nullopt, "ctx", std::nullopt}};
    with_just.gold_justification = "the removed sentence named the risk";
    instances.push_back(with_just);
    QAInstance without_just = with_just;
    without_just.id = "b";
    without_just.gold_justification.reset();
    instances.push_back(without_just);

    auto v_a = verdict_of("a", Label::insufficient);
    v_a.gap_text = "the risk sentence is gone";
    auto v_b = verdict_of("b", Label::insufficient);
    v_b.gap_text = "something";
    auto v_c = verdict_of("a", Label::sufficient); // sufficient: out of scope

    const auto summary = judge_alignment({v_a, v_b, v_c}, instances, gw, cfg, reg);
    CHECK(summary.judged == 1);
    CHECK(summary.mean == 4.0);
    CHECK(summary.histogram[3] == 1);
}

TEST_CASE("disagreement curve comes from stored step-1 polarities", "[eval][curve]") {
    auto make = [](std::vector<Polarity> ps) {
        SufficiencyVerdict v = verdict_of("x", Label::sufficient);
        static int n = 0;
        v.instance_id = "x" + std::to_string(n++);
        for (size_t i = 0; i < ps.size(); ++i)
            v.hypotheses.push_back({ps[i], ps[i] == Polarity::gap ? "claim" : "", "", static_cast<int>(i)});
        return v;
    };
    using P = Polarity;
    const std::vector<SufficiencyVerdict> verdicts = {make({P::gap, P::gap, P::gap}),
                                                      make({P::gap, P::no_gap, P::gap}),
                                                      make({P::no_gap, P::no_gap, P::no_gap})};
    const auto curve = disagreement_curve(verdicts);
    REQUIRE(curve.size() == 3);
    CHECK(curve[0] == std::pair<int, double>{1, 0.0});
    CHECK(curve[1].second == Catch::Approx(100.0 / 3.0));
    CHECK(curve[2].second == Catch::Approx(100.0 / 3.0));

    // baseline files (no hypotheses) yield no curve
    CHECK(disagreement_curve({verdict_of("b", Label::sufficient)}).empty());
}

TEST_CASE("one-sided flip consistency across full and identify-only verdicts", "[eval][property]") {
    // cross-module property: run both modes over randomized scripted
    // instances and check every disagreement flips insufficient -> sufficient
    const auto batch = fixtures::build_random_batch(60, 8112);
    const auto reg = TemplateRegistry::builtin();
    Gateway gw_full(std::make_shared<MockBackend>(batch.script));
    Gateway gw_io(std::make_shared<MockBackend>(batch.script));

    const auto full = assess_batch(batch.instances, fixtures::default_pipeline_config(PipelineMode::full),
                                   gw_full, reg);
    const auto io = assess_batch(batch.instances,
                                 fixtures::default_pipeline_config(PipelineMode::identify_only), gw_io, reg);
    REQUIRE(full.size() == io.size());
    int flips = 0;
    for (size_t i = 0; i < full.size(); ++i) {
        REQUIRE(full[i].verdict.has_value());
        REQUIRE(io[i].verdict.has_value());
        const Label lf = full[i].verdict->label;
        const Label li = io[i].verdict->label;
        if (lf != li) {
            ++flips;
            CHECK(li == Label::insufficient);
            CHECK(lf == Label::sufficient);
        }
    }
    CHECK(flips > 0); // the fixture contains verified-present scenarios
}

TEST_CASE("emit_report writes deterministic files and omits empty sections", "[eval][report]") {
    const fs::path dir = fs::temp_directory_path() / ("gapcheck_report_" + std::to_string(::getpid()));
    fs::remove_all(dir);

    EvalReport report;
    report.dataset = "fixture-set";
    report.system = "ours";
    report.n_instances = 3;
    report.accuracy_pct = 66.6667;
    report.confusion = {1, 1, 0, 1};
    report.disagreement_curve = {{1, 0.0}, {2, 20.0}, {3, 30.0}, {4, 33.3333}, {5, 33.3333}};
    report.rer = 25.0;
    report.config_fingerprint = "abc123";

    const auto files = emit_report(report, {"json", "table", "svg"}, dir / "a");
    CHECK(files.written.size() == 4); // metrics.json, report.txt, disagreement.svg, rer.svg

    SECTION("byte-stable across emissions") {
        emit_report(report, {"json", "table", "svg"}, dir / "b");
        for (const char* name : {"metrics.json", "report.txt", "disagreement.svg", "rer.svg"})
            CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    }
    SECTION("disagreement plot carries the points and axis labels") {
        const std::string svg = slurp(dir / "a" / "disagreement.svg");
        CHECK(svg.find("number of runs") != std::string::npos);
        CHECK(svg.find("% conflicting") != std::string::npos);
        size_t circles = 0, pos = 0;
        while ((pos = svg.find("<circle", pos)) != std::string::npos) {
            ++circles;
            pos += 7;
        }
        CHECK(circles == 5);
    }
    SECTION("empty optional sections are omitted") {
        EvalReport bare;
        bare.dataset = "bare";
        bare.system = "autorater";
        bare.n_instances = 1;
        bare.accuracy_pct = 100.0;
        bare.confusion = {1, 0, 0, 0};
        const auto bare_files = emit_report(bare, {"json", "table", "svg"}, dir / "bare");
        CHECK(bare_files.written.size() == 2); // no curve, no rer: no svg files
        const json metrics = json::parse(slurp(dir / "bare" / "metrics.json"));
        CHECK_FALSE(metrics.contains("rer_pct"));
        CHECK_FALSE(metrics.contains("disagreement_curve"));
        CHECK_FALSE(metrics.contains("alignment"));
        const std::string table = slurp(dir / "bare" / "report.txt");
        CHECK(table.find("relative error reduction") == std::string::npos);
        CHECK(table.find("disagreement") == std::string::npos);
    }
    SECTION("metrics round-trip for re-rendering") {
        const json metrics = json::parse(slurp(dir / "a" / "metrics.json"));
        const EvalReport back = metrics.get<EvalReport>();
        CHECK(back.accuracy_pct == report.accuracy_pct);
        CHECK(back.disagreement_curve == report.disagreement_curve);
        CHECK(back.rer == report.rer);
    }
    fs::remove_all(dir);
}

TEST_CASE("build_report assembles accuracy and curve from verdicts", "[eval][report]") {
    GoldLabels gold{{"a", Label::sufficient}, {"b", Label::insufficient}};
    auto va = verdict_of("a", Label::sufficient);
    va.hypotheses = {{Polarity::no_gap, "", "", 0}, {Polarity::no_gap, "", "", 1}};
    auto vb = verdict_of("b", Label::insufficient);
    vb.hypotheses = {{Polarity::gap, "c", "", 0}, {Polarity::no_gap, "", "", 1}};
    const auto report = build_report("mini", {va, vb}, gold);
    CHECK(report.n_instances == 2);
    CHECK(report.accuracy_pct == 100.0);
    REQUIRE(report.disagreement_curve.size() == 2);
    CHECK(report.disagreement_curve[1].second == 50.0);
}
