#include <doctest.h>

#include <random>

#include "test_helpers.hpp"
#include "trajforge/convert.hpp"
#include "trajforge/grammar.hpp"
#include "trajforge/jsonl.hpp"
#include "trajforge/schema.hpp"

using namespace trajforge;

namespace {

SourceGrammar grammar_for(const std::string& source) {
    auto g = load_grammar(testutil::grammar_path(source));
    REQUIRE(g.ok());
    return std::move(g).take();
}

// Flat reference construction of the aggregated input, deliberately written
// as a single concatenation pass rather than a recursion.
std::string iterative_history_oracle(const std::vector<StepLocal>& locals, std::size_t i) {
    std::string out = locals[0].local_prompt;
    for (std::size_t k = 1; k < i; ++k) {
        out += "\n";
        out += "Action: ";
        out += locals[k - 1].output;
        out += "\n";
        out += "Observation: ";
        out += locals[k - 1].next_observation;
        out += "\n";
        out += locals[k].local_prompt;
    }
    return out;
}

}  // namespace

TEST_CASE("grammar configs load and honor the marker invariants") {
    for (const char* source : {"hotpotqa", "webshop", "toolalpaca", "toolbench"}) {
        const SourceGrammar g = grammar_for(source);
        CHECK(g.source == source);
        CHECK(!g.markers.action.empty());
    }
    CHECK(!parse_grammar(R"({"source":"x","layout":"monolithic_prompt",
        "markers":{"query":"Q:","thought":"T:","action":"A:","observation":"A:"}})")
               .ok());
    CHECK(!parse_grammar(R"({"source":"x","layout":"monolithic_prompt",
        "markers":{"query":"","thought":"T:","action":"A:","observation":"O:"}})")
               .ok());
    CHECK(!parse_grammar(R"({"source":"x","layout":"sideways"})").ok());
}

TEST_CASE("expand_marker substitutes the running index") {
    CHECK(expand_marker("Action {i}:", 3) == "Action 3:");
    CHECK(expand_marker("Action:", 3) == "Action:");
}

TEST_CASE("monolithic conversion splits the H1 transcript") {
    const SourceGrammar g = grammar_for("hotpotqa");
    const RawRecord raw{
        "hotpotqa",
        R"({"prompt":"Question: Q?\nThought 1: T1\nAction 1: Search[x]\nObservation 1: O1\nThought 2: T2\nAction 2: Finish[a]"})"};
    auto result = convert_monolithic(raw, g);
    REQUIRE(result.ok());
    const UnifiedTrajectory& t = result.value();
    CHECK(validate(t).empty());
    CHECK(t.user_query == "Q?");
    REQUIRE(t.steps.size() == 2);
    CHECK(t.steps[0].input == "Question: Q?");
    CHECK(t.steps[0].output == "Thought 1: T1\nAction 1: Search[x]");
    CHECK(t.steps[0].next_observation == "O1");
    CHECK(t.steps[1].input ==
          "Question: Q?\nAction: Thought 1: T1\nAction 1: Search[x]\nObservation: O1\n");
    CHECK(t.steps[1].output == "Thought 2: T2\nAction 2: Finish[a]");
    CHECK(t.steps[1].next_observation == "");
}

TEST_CASE("monolithic conversion error paths") {
    const SourceGrammar g = grammar_for("hotpotqa");
    SUBCASE("no action markers") {
        const RawRecord raw{"hotpotqa", R"({"prompt":"Question: Q?\njust text"})"};
        auto result = convert_monolithic(raw, g);
        REQUIRE(!result.ok());
        CHECK(result.error().code == Errc::NoStepsFound);
    }
    SUBCASE("thought without any action") {
        const RawRecord raw{"hotpotqa", R"({"prompt":"Question: Q?\nThought 1: hmm"})"};
        auto result = convert_monolithic(raw, g);
        REQUIRE(!result.ok());
        CHECK(result.error().code == Errc::NoStepsFound);
    }
    SUBCASE("missing prompt key") {
        const RawRecord raw{"hotpotqa", R"({"other":"field"})"};
        auto result = convert_monolithic(raw, g);
        REQUIRE(!result.ok());
        CHECK(result.error().code == Errc::MissingPromptKey);
    }
    SUBCASE("observation before its action") {
        const RawRecord raw{
            "hotpotqa",
            R"({"prompt":"Question: Q?\nObservation 1: premature\nAction 1: Search[x]"})"};
        auto result = convert_monolithic(raw, g);
        REQUIRE(!result.ok());
        CHECK(result.error().code == Errc::MarkerOrderViolation);
    }
    SUBCASE("payload is not an object") {
        const RawRecord raw{"hotpotqa", "]["};
        CHECK(!convert_monolithic(raw, g).ok());
    }
}

TEST_CASE("conversion is deterministic including the trajectory id") {
    const SourceGrammar g = grammar_for("hotpotqa");
    const RawRecord raw{
        "hotpotqa",
        R"({"prompt":"Question: Q?\nThought 1: T1\nAction 1: Search[x]\nObservation 1: O1\nThought 2: T2\nAction 2: Finish[a]"})"};
    auto first = convert_monolithic(raw, g);
    auto second = convert_monolithic(raw, g);
    REQUIRE(first.ok());
    REQUIRE(second.ok());
    CHECK(to_json_line(first.value()) == to_json_line(second.value()));
    CHECK(first.value().trajectory_id == second.value().trajectory_id);
}

TEST_CASE("markers quoted inside text do not create extra steps") {
    const SourceGrammar g = grammar_for("hotpotqa");
    // "Action 1:" mid-line, an out-of-sequence "Action 5:" at line start, and
    // a numbered marker inside a thought line.
    const auto lines = read_all_lines(testutil::fixture_path("raw/hotpotqa.jsonl"));
    REQUIRE(lines.size() == 2);
    const RawRecord raw{"hotpotqa", lines[1]};
    auto result = convert_monolithic(raw, g);
    REQUIRE(result.ok());
    const UnifiedTrajectory& t = result.value();
    CHECK(validate(t).empty());
    REQUIRE(t.steps.size() == 3);
    CHECK(t.steps[0].next_observation ==
          "X is a novel. The cover says \"Action 1: do not press\".");
    CHECK(t.steps[1].next_observation ==
          "(Result 1 / 1) X was written by Y.\nAction 5: stale example text");
    CHECK(t.score == 0.5);
    CHECK(t.model_name == "react-demo");
}

TEST_CASE("triplet conversion aligns lists and rebuilds inputs") {
    const SourceGrammar g = grammar_for("toolalpaca");
    const RawRecord raw{
        "toolalpaca",
        R"x({"prompts":["### Instruction:\nDo the thing.","(history)","(history)"],
            "outputs":["callA()","callB()","Finish(\"ok\")"],
            "observations":["resultA","resultB",""]})x"};
    auto result = convert_triplets(raw, g);
    REQUIRE(result.ok());
    const UnifiedTrajectory& t = result.value();
    CHECK(validate(t).empty());
    REQUIRE(t.steps.size() == 3);
    CHECK(t.user_query == "Do the thing.");
    CHECK(t.steps[1].input ==
          t.steps[0].input + "\n" + "Action: " + "callA()" + "\n" + "Observation: " + "resultA" +
              "\n");
    CHECK(t.steps[2].input.starts_with(t.steps[1].input));
}

TEST_CASE("triplet conversion edge and error cases") {
    const SourceGrammar g = grammar_for("toolalpaca");
    SUBCASE("single turn with omitted terminal observation") {
        const RawRecord raw{"toolalpaca",
                            R"x({"prompts":["### Instruction:\nPing."],
                                "outputs":["Finish(\"done\")"],"observations":[]})x"};
        auto result = convert_triplets(raw, g);
        REQUIRE(result.ok());
        REQUIRE(result.value().steps.size() == 1);
        CHECK(result.value().steps[0].next_observation == "");
    }
    SUBCASE("missing terminal observation without a terminal action") {
        const RawRecord raw{"toolalpaca",
                            R"x({"prompts":["### Instruction:\nPing."],
                                "outputs":["callA()"],"observations":[]})x"};
        auto result = convert_triplets(raw, g);
        REQUIRE(!result.ok());
        CHECK(result.error().code == Errc::LengthMismatch);
    }
    SUBCASE("irreconcilable counts") {
        const RawRecord raw{"toolalpaca",
                            R"x({"prompts":["### Instruction:\nPing."],
                                "outputs":["a()","b()","Finish(\"x\")"],"observations":["r1"]})x"};
        auto result = convert_triplets(raw, g);
        REQUIRE(!result.ok());
        CHECK(result.error().code == Errc::LengthMismatch);
    }
    SUBCASE("empty episode") {
        const RawRecord raw{"toolalpaca",
                            R"x({"prompts":["### Instruction:\nPing."],
                                "outputs":[],"observations":[]})x"};
        auto result = convert_triplets(raw, g);
        REQUIRE(!result.ok());
        CHECK(result.error().code == Errc::EmptyEpisode);
    }
    SUBCASE("prompts list empty") {
        const RawRecord raw{"toolalpaca",
                            R"x({"prompts":[],"outputs":["Finish(\"x\")"],"observations":[]})x"};
        auto result = convert_triplets(raw, g);
        REQUIRE(!result.ok());
        CHECK(result.error().code == Errc::LengthMismatch);
    }
}

TEST_CASE("aggregate_history follows the worked examples") {
    const std::vector<StepLocal> locals = {{"P", "A1", "O1"}, {"", "A2", "O2"}};
    auto first = aggregate_history(locals, 1);
    REQUIRE(first.ok());
    CHECK(first.value() == "P");
    auto second = aggregate_history(locals, 2);
    REQUIRE(second.ok());
    CHECK(second.value() == "P\nAction: A1\nObservation: O1\n");
    CHECK(!aggregate_history(locals, 0).ok());
    CHECK(!aggregate_history(locals, 3).ok());
}

TEST_CASE("aggregate_history matches the iterative oracle on random tuples") {
    std::mt19937_64 rng(99);
    const std::string alphabet = "xy z:\n\"(),";
    auto random_text = [&](std::size_t max_len) {
        std::string s;
        const std::size_t len = rng() % (max_len + 1);
        for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
        return s;
    };
    for (int iter = 0; iter < 300; ++iter) {
        const std::size_t n = 1 + rng() % 6;
        std::vector<StepLocal> locals;
        for (std::size_t i = 0; i < n; ++i) {
            locals.push_back({i == 0 ? "p0" + random_text(10) : random_text(4), random_text(10),
                              random_text(10)});
        }
        std::string previous;
        for (std::size_t i = 1; i <= n; ++i) {
            auto got = aggregate_history(locals, i);
            REQUIRE(got.ok());
            CHECK(got.value() == iterative_history_oracle(locals, i));
            if (i > 1) {
                // prefix property
                CHECK(got.value().compare(0, previous.size(), previous) == 0);
            }
            previous = got.value();
        }
        const std::vector<Step> steps = build_steps(locals);
        REQUIRE(steps.size() == n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(steps[i].input == iterative_history_oracle(locals, i + 1));
        }
    }
}

TEST_CASE("shipped fixtures convert to the golden files byte-for-byte") {
    for (const char* source : {"hotpotqa", "webshop", "toolalpaca", "toolbench"}) {
        const SourceGrammar g = grammar_for(source);
        const auto raw_lines =
            read_all_lines(testutil::fixture_path(std::string("raw/") + source + ".jsonl"));
        const auto golden_lines =
            read_all_lines(testutil::fixture_path(std::string("golden/") + source + ".jsonl"));
        REQUIRE(raw_lines.size() == golden_lines.size());
        for (std::size_t i = 0; i < raw_lines.size(); ++i) {
            auto converted = convert_record({g.source, raw_lines[i]}, g);
            REQUIRE(converted.ok());
            CHECK(validate(converted.value()).empty());
            CHECK(to_json_line(converted.value()) == golden_lines[i]);
        }
    }
}
