#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "gapcheck/templates.hpp"

using namespace gapcheck;

TEST_CASE("builtin registry serves every pipeline template", "[templates]") {
    const auto reg = TemplateRegistry::builtin();
    for (const char* id : {template_ids::identify, template_ids::verify_pragmatic, template_ids::verify_strict,
                           template_ids::autorater, template_ids::answer_abstain,
                           template_ids::filter_context_free, template_ids::filter_judge,
                           template_ids::alignment_judge}) {
        CHECK(reg.has(id));
        CHECK(reg.digest(id).size() == 64);
    }
    CHECK_THROWS_AS(reg.raw("nonexistent/v1"), TemplateNotFound);
}

TEST_CASE("render splits system/user sections and substitutes placeholders", "[templates]") {
    TemplateRegistry reg;
    reg.put("t", "the system line\n---\nQ: {question}\nagain {question} and {unknown}");
    const auto messages = reg.render("t", {{"question", "why?"}});
    REQUIRE(messages.size() == 2);
    CHECK(messages[0].role == "system");
    CHECK(messages[0].text == "the system line");
    CHECK(messages[1].role == "user");
    CHECK(messages[1].text == "Q: why?\nagain why? and {unknown}");
}

TEST_CASE("substitution is single-pass: values are never re-expanded", "[templates]") {
    TemplateRegistry reg;
    reg.put("t", "before {value} after");
    const auto messages = reg.render("t", {{"value", "literal {value} braces"}});
    CHECK(messages[0].text == "before literal {value} braces after");
}

TEST_CASE("templates without a separator render as a single user message", "[templates]") {
    TemplateRegistry reg;
    reg.put("t", "just a user prompt {x}");
    const auto messages = reg.render("t", {{"x", "1"}});
    REQUIRE(messages.size() == 1);
    CHECK(messages[0].role == "user");
}

TEST_CASE("repository template files are byte-identical to the built-ins", "[templates]") {
    // templates/ is the published copy of the built-in prompts; the two must
    // never drift apart.
    TemplateRegistry from_files;
    from_files.load_directory(GAPCHECK_TEMPLATES_DIR);
    const auto builtin = TemplateRegistry::builtin();
    for (const auto& id : builtin.ids()) {
        INFO("template id: " << id);
        REQUIRE(from_files.has(id));
        CHECK(from_files.raw(id) == builtin.raw(id));
    }
}

TEST_CASE("directory overrides replace built-ins by id", "[templates]") {
    const auto dir = std::filesystem::temp_directory_path() / "gapcheck_tpl_override";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir / "identify");
    {
        std::ofstream out(dir / "identify" / "v1.txt");
        out << "sys\n---\ncustom {question}\n";
    }
    auto reg = TemplateRegistry::builtin();
    const std::string before = reg.digest(template_ids::identify);
    reg.load_directory(dir);
    CHECK(reg.digest(template_ids::identify) != before);
    CHECK(reg.render(template_ids::identify, {{"question", "q"}}).back().text == "custom q");
    std::filesystem::remove_all(dir);
}
