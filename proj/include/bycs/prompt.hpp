#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bycs/types.hpp"

namespace bycs {

/// Few-shot prompt template. The example block must mention {input} and
/// {label} exactly once each and the query block {input} exactly once;
/// this is enforced when the template is built, never at render time.
/// Placeholder positions are frozen at construction so rendering is a pure
/// splice and values containing literal braces cannot confuse it.
class PromptTemplate {
public:
    PromptTemplate(std::string id, const std::string& example_block,
                   const std::string& query_block, std::string separator,
                   std::string preamble = "")
        : id_(std::move(id)),
          separator_(std::move(separator)),
          preamble_(std::move(preamble)) {
        const std::size_t ex_input = find_single(example_block, "{input}", "example_block");
        const std::size_t ex_label = find_single(example_block, "{label}", "example_block");
        example_input_first_ = ex_input < ex_label;
        const std::size_t first = std::min(ex_input, ex_label);
        const std::size_t second = std::max(ex_input, ex_label);
        constexpr std::size_t ph_len = 7; // "{input}" and "{label}" are both 7 chars
        example_pre_ = example_block.substr(0, first);
        example_mid_ = example_block.substr(first + ph_len, second - (first + ph_len));
        example_post_ = example_block.substr(second + ph_len);

        const std::size_t q_input = find_single(query_block, "{input}", "query_block");
        if (query_block.find("{label}") != std::string::npos)
            throw validation_error("template \"" + id_ +
                                   "\": query_block must not contain {label}");
        query_pre_ = query_block.substr(0, q_input);
        query_post_ = query_block.substr(q_input + ph_len);
    }

    static PromptTemplate from_json(const json& j) {
        detail::require_object(j, "template");
        detail::check_known_keys(
            j, {"id", "example_block", "query_block", "separator", "preamble"},
            "template");
        return PromptTemplate(j.value("id", std::string("custom")),
                              j.at("example_block").get<std::string>(),
                              j.at("query_block").get<std::string>(),
                              j.value("separator", std::string("\n\n")),
                              j.value("preamble", std::string()));
    }

    const std::string& id() const { return id_; }

    std::string render_example(const std::string& input, const std::string& label) const {
        if (example_input_first_)
            return example_pre_ + input + example_mid_ + label + example_post_;
        return example_pre_ + label + example_mid_ + input + example_post_;
    }

    std::string render_query(const std::string& input) const {
        return query_pre_ + input + query_post_;
    }

    const std::string& separator() const { return separator_; }
    const std::string& preamble() const { return preamble_; }

private:
    static std::size_t find_single(const std::string& block, const std::string& ph,
                                   const char* what) {
        const std::size_t pos = block.find(ph);
        if (pos == std::string::npos)
            throw validation_error(std::string("template ") + what +
                                   " is missing placeholder " + ph);
        if (block.find(ph, pos + 1) != std::string::npos)
            throw validation_error(std::string("template ") + what +
                                   " contains placeholder " + ph + " more than once");
        return pos;
    }

    std::string id_;
    std::string separator_;
    std::string preamble_;
    std::string example_pre_, example_mid_, example_post_;
    std::string query_pre_, query_post_;
    bool example_input_first_ = true;
};

/// Renders: preamble (when present), each example in the given order, then
/// the query block, all joined by the template separator. Byte-deterministic;
/// zero examples is the no-context case.
inline std::string render_prompt(const PromptTemplate& tmpl,
                                 const std::vector<std::pair<std::string, std::string>>& examples,
                                 const std::string& query_input) {
    std::string out;
    bool first = true;
    const auto append = [&](const std::string& part) {
        if (!first)
            out += tmpl.separator();
        out += part;
        first = false;
    };
    if (!tmpl.preamble().empty())
        append(tmpl.preamble());
    for (const auto& [input, label] : examples)
        append(tmpl.render_example(input, label));
    append(tmpl.render_query(query_input));
    return out;
}

/// Built-in templates, addressable by SelectionConfig::template_id.
inline PromptTemplate builtin_template(const std::string& id) {
    if (id == "qa")
        return PromptTemplate("qa", "Q: {input}\nA: {label}", "Q: {input}\nA:", "\n\n");
    if (id == "transcript")
        return PromptTemplate("transcript", "Audio: {input}\nTranscript: {label}",
                              "Audio: {input}\nTranscript:", "\n\n");
    if (id == "plain")
        return PromptTemplate("plain", "{input}\n{label}", "{input}\n", "\n");
    throw validation_error("unknown template_id: \"" + id + "\"");
}

/// Resolves the template for a config: an inline "template" object wins over
/// the built-in registry.
inline PromptTemplate resolve_template(const SelectionConfig& cfg) {
    if (cfg.template_override)
        return PromptTemplate::from_json(*cfg.template_override);
    return builtin_template(cfg.template_id);
}

} // namespace bycs
