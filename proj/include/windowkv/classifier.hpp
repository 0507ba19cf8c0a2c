// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "windowkv/policies.hpp"
#include "windowkv/scoring.hpp"

namespace windowkv {

struct ClassifierDecision {
    TaskType task = TaskType::kLocalization;
    double confidence = 0.5;             // winning vote weight / total vote weight; 0.5 without votes
    std::vector<std::string> matched_rules;
    int localization_votes = 0;
    int aggregation_votes = 0;
};

/// Decides whether a prompt asks to locate information or to aggregate it.
/// Runs once per request, never per layer.
class TaskClassifier {
public:
    virtual ~TaskClassifier() = default;
    virtual ClassifierDecision classify(std::string_view prompt_text) const = 0;
};

/**
 * Keyword and structure rules over the prompt. Aggregation cues: summary
 * requests, report writing, few-shot exemplar delimiters, code-completion
 * markers. Localization cues: a question near the end, wh-words in the
 * closing instruction, "answer the question". Each matched rule adds its
 * weight to one side; ties fall to localization.
 */
class HeuristicClassifier final : public TaskClassifier {
public:
    ClassifierDecision classify(std::string_view prompt_text) const override;
};

/// Returns the configured task unless it is kAuto, in which case the classifier decides.
TaskType classify_or_override(std::string_view prompt_text, const CompressionConfig& config,
                              const TaskClassifier& classifier);

}  // namespace windowkv
