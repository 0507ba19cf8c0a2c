// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "windowkv/classifier.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>

#include "windowkv/error.hpp"

namespace windowkv {

namespace {

// Closing instructions and the actual question sit at the end of long prompts;
// the context before them says little about the task.
constexpr std::size_t kTailChars = 300;

std::string lowercase(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool contains_word(std::string_view text, std::string_view word) {
    for (std::size_t pos = text.find(word); pos != std::string_view::npos; pos = text.find(word, pos + 1)) {
        const bool left = pos == 0 || !is_word_char(text[pos - 1]);
        const std::size_t end = pos + word.size();
        const bool right = end >= text.size() || !is_word_char(text[end]);
        if (left && right) {
            return true;
        }
    }
    return false;
}

bool contains(std::string_view text, std::string_view needle) {
    return text.find(needle) != std::string_view::npos;
}

template <std::size_t N>
bool contains_any(std::string_view text, const std::array<std::string_view, N>& needles) {
    return std::any_of(needles.begin(), needles.end(), [&](std::string_view n) { return contains(text, n); });
}

// Line-leading "label:" markers that repeat at least three times, e.g. the
// Question:/Answer: pairs of in-context examples.
std::vector<std::string> repeated_delimiters(std::string_view lower) {
    static constexpr std::array<std::string_view, 9> kLabels = {
        "question:", "answer:", "type:", "summary:", "dialogue:", "passage:", "input:", "output:", "label:"};
    std::map<std::string_view, int> counts;
    std::size_t line_start = 0;
    while (line_start < lower.size()) {
        std::size_t first = line_start;
        while (first < lower.size() && (lower[first] == ' ' || lower[first] == '\t')) {
            ++first;
        }
        for (std::string_view label : kLabels) {
            if (lower.substr(first, label.size()) == label) {
                ++counts[label];
            }
        }
        const std::size_t nl = lower.find('\n', line_start);
        if (nl == std::string_view::npos) {
            break;
        }
        line_start = nl + 1;
    }
    std::vector<std::string> out;
    for (const auto& [label, count] : counts) {
        if (count >= 3) {
            out.emplace_back(label.substr(0, label.size() - 1));
        }
    }
    return out;
}

bool looks_like_code(std::string_view text) {
    static constexpr std::array<std::string_view, 12> kMarkers = {
        "def ", "import ", "#include", "return ", "public ", "private ", "function ", "=>", "};", "();", "self.",
        "this."};
    int hits = 0;
    for (std::string_view m : kMarkers) {
        hits += contains(text, m) ? 1 : 0;
    }
    return hits >= 2;
}

// Trailing code left open: unbalanced brackets in the tail, or a last
// non-blank line ending in a continuation character.
bool ends_in_open_code(std::string_view tail) {
    int paren = 0;
    int brace = 0;
    int bracket = 0;
    for (char c : tail) {
        paren += c == '(' ? 1 : c == ')' ? -1 : 0;
        brace += c == '{' ? 1 : c == '}' ? -1 : 0;
        bracket += c == '[' ? 1 : c == ']' ? -1 : 0;
    }
    if (paren > 0 || brace > 0 || bracket > 0) {
        return true;
    }
    std::size_t end = tail.find_last_not_of(" \t\r\n");
    if (end == std::string_view::npos) {
        return false;
    }
    const char last = tail[end];
    return last == '{' || last == '(' || last == ',' || last == '=' || last == '\\';
}

struct Ballot {
    ClassifierDecision decision;

    void vote(TaskType side, std::string rule, int weight) {
        (side == TaskType::kLocalization ? decision.localization_votes : decision.aggregation_votes) += weight;
        decision.matched_rules.push_back(std::move(rule));
    }
};

}  // namespace

ClassifierDecision HeuristicClassifier::classify(std::string_view prompt_text) const {
    const std::string lower = lowercase(prompt_text);
    require(lower.find_first_not_of(" \t\r\n") != std::string::npos, ErrorKind::kValidation,
            "cannot classify empty text");
    const std::string_view all = lower;
    const std::string_view tail = all.substr(all.size() > kTailChars ? all.size() - kTailChars : 0);

    Ballot b;
    constexpr auto kAgg = TaskType::kAggregation;
    constexpr auto kLoc = TaskType::kLocalization;

    // Aggregation cues.
    if (contains_word(all, "summarize") || contains_word(all, "summarise") || contains(all, "summariz")) {
        b.vote(kAgg, "agg.summarize", 2);
    }
    if (contains_word(all, "summary") || contains_word(all, "summaries")) {
        b.vote(kAgg, "agg.summary", 1);
    }
    // A summary requested by the closing instruction outweighs a stray question in the context.
    if (contains(tail, "summar")) {
        b.vote(kAgg, "agg.summary_instruction", 2);
    }
    if (contains(all, "in one or more sentences")) {
        b.vote(kAgg, "agg.multi_sentence_answer", 1);
    }
    if (contains_word(all, "report")) {
        b.vote(kAgg, "agg.report", 1);
    }
    if (contains(all, "write a")) {
        b.vote(kAgg, "agg.write_a", 1);
    }
    if (contains_any(all, std::array<std::string_view, 3>{"following are some examples", "here are some examples",
                                                          "examples of"})) {
        b.vote(kAgg, "agg.few_shot_examples", 2);
    }
    for (const auto& label : repeated_delimiters(all)) {
        b.vote(kAgg, "agg.few_shot_delimiter." + label, 2);
    }
    if (contains_any(all, std::array<std::string_view, 3>{"complete the code", "next line of code", "code completion"})) {
        b.vote(kAgg, "agg.code_completion", 3);
    }
    if (looks_like_code(all)) {
        b.vote(kAgg, "agg.code_markers", 1);
    }
    if (looks_like_code(tail) && ends_in_open_code(tail)) {
        b.vote(kAgg, "agg.unclosed_code", 1);
    }
    if (contains_any(all, std::array<std::string_view, 3>{"how many unique", "count of unique", "removing duplicates"})) {
        b.vote(kAgg, "agg.counting", 3);
    }
    if (contains_any(all, std::array<std::string_view, 2>{"which paragraph", "paragraph that the abstract"})) {
        b.vote(kAgg, "agg.paragraph_match", 3);
    }
    if (contains(all, "answer the query")) {
        b.vote(kAgg, "agg.query_summary", 2);
    }

    // Localization cues.
    if (contains(tail, "?")) {
        b.vote(kLoc, "loc.question_tail", 1);
    }
    static constexpr std::array<std::string_view, 6> kWhWords = {"who", "what", "when", "where", "why", "which"};
    if (std::any_of(kWhWords.begin(), kWhWords.end(), [&](std::string_view w) { return contains_word(tail, w); })) {
        b.vote(kLoc, "loc.wh_word", 1);
    }
    if (contains(all, "answer the question") || contains(all, "answer the following question")) {
        b.vote(kLoc, "loc.answer_the_question", 2);
    }
    if (contains(tail, "question:")) {
        b.vote(kLoc, "loc.question_label", 1);
    }
    if (contains_any(all, std::array<std::string_view, 4>{"based on the given passage", "based on the above",
                                                          "based on the passage", "based on the story"})) {
        b.vote(kLoc, "loc.source_grounding", 1);
    }

    ClassifierDecision& d = b.decision;
    const int total = d.localization_votes + d.aggregation_votes;
    d.task = d.aggregation_votes > d.localization_votes ? kAgg : kLoc;
    d.confidence = total == 0 ? 0.5
                              : static_cast<double>(std::max(d.localization_votes, d.aggregation_votes)) / total;
    return d;
}

TaskType classify_or_override(std::string_view prompt_text, const CompressionConfig& config,
                              const TaskClassifier& classifier) {
    switch (config.task) {
        case TaskChoice::kLocalization: return TaskType::kLocalization;
        case TaskChoice::kAggregation: return TaskType::kAggregation;
        case TaskChoice::kAuto: break;
    }
    return classifier.classify(prompt_text).task;
}

}  // namespace windowkv
