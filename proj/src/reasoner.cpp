#include "tasr/reasoner.hpp"

#include <algorithm>
#include <future>
#include <set>

#include <nlohmann/json.hpp>

#include "tasr/prompts.hpp"

namespace tasr {

SubQuery resolve(const SubQuery& sq, const BindingTable& table) {
    SubQuery out = sq;
    auto substitute = [&](Slot& slot) {
        if (!slot.is_latent()) return;
        if (const auto* value = table.find(slot.text())) slot = Slot::bound(*value);
    };
    substitute(out.head);
    substitute(out.tail);
    return out;
}

namespace {

std::string spaced(std::string s) {
    std::replace(s.begin(), s.end(), '_', ' ');
    return s;
}

}  // namespace

std::string render_subquery_question(const SubQuery& resolved) {
    const std::string statement =
        resolved.head.text() + " " + spaced(resolved.relation) + " " + resolved.tail.text();
    auto latents = resolved.latent_names();
    if (latents.empty()) return "Is it true that " + statement + "? Answer yes or no.";
    if (latents.size() == 1) return statement + ". What is " + latents.front() + "?";
    return statement + ". What are " + latents.front() + " and " + latents.back() + "?";
}

std::string answer_subquery(const SubQuery& resolved, std::span<const Document* const> docs,
                            const BindingTable& table, LlmGateway& gateway) {
    if (docs.empty()) throw Error(ErrorKind::EmptyPool, "no evidence documents for " + resolved.str());
    std::string facts;
    for (const auto& [name, value] : table.entries()) {
        facts += (facts.empty() ? "" : "; ") + name + " = " + value;
    }
    std::string listing;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        listing += "[" + std::to_string(i + 1) + "] " + docs[i]->title + "\n" + docs[i]->text + "\n\n";
    }
    auto req = build_request(RoleTag::Answer, "answer",
                             {{"question", render_subquery_question(resolved)},
                              {"bindings", facts.empty() ? "(none)" : facts},
                              {"documents", trim(listing)}});
    auto resp = gateway.chat_complete(std::move(req), [](const nlohmann::json& j) -> std::string {
        if (!j.is_object() || !j.contains("answer")) return "expected object with \"answer\"";
        if (!j["answer"].is_string() && !j["answer"].is_number() && !j["answer"].is_boolean()) {
            return "\"answer\" must be a string";
        }
        return "";
    });
    const auto& a = resp.parsed["answer"];
    if (a.is_string()) return trim(a.get<std::string>());
    if (a.is_boolean()) return a.get<bool>() ? "yes" : "no";
    return a.dump();
}

std::optional<std::pair<std::string, std::string>> bind(const SubQuery& resolved,
                                                        const std::string& answer,
                                                        BindingTable& table) {
    auto latents = resolved.latent_names();
    if (latents.empty()) return std::nullopt;
    if (latents.size() > 1) {
        throw Error(ErrorKind::AmbiguousBinding,
                    resolved.str() + " leaves " + latents.front() + " and " + latents.back() + " unbound");
    }
    std::string value = trim(answer);
    if (value.empty()) {
        throw Error(ErrorKind::EmptyAnswer, "empty answer for " + latents.front());
    }
    table.insert(latents.front(), value);
    return std::make_pair(latents.front(), value);
}

// ---------------------------------------------------------------------------

Pipeline::Pipeline(PipelineConfig cfg, std::shared_ptr<const Taxonomy> taxonomy,
                   std::shared_ptr<Embedder> embedder, std::shared_ptr<LlmGateway> gateway,
                   std::vector<Document> corpus, PipelineOptions options)
    : cfg_(validate_config(cfg)),
      options_(options),
      taxonomy_(std::move(taxonomy)),
      embedder_(std::move(embedder)),
      gateway_(std::move(gateway)),
      corpus_(std::move(corpus)) {
    if (cfg_.typing_mode == TypingMode::Retrieval) {
        type_index_ = std::make_shared<const TypeIndex>(TypeIndex::build(*taxonomy_, *embedder_));
    }
    typer_ = std::make_unique<EntityTyper>(taxonomy_, type_index_, embedder_, gateway_, cfg_);
    corpus_index_ = build_corpus_index(corpus_, *embedder_);
    if (options_.pre_extract) {
        for (const auto& d : corpus_) pre_extracted_[d.id] = extract_triples(d, "", *gateway_);
    }
}

std::vector<Document> Pipeline::prepare_pool(const std::string& question, ReasoningTrace& trace) {
    auto pool = dense_retrieve(question, corpus_index_, corpus_, *embedder_, cfg_);
    for (const auto& d : pool) trace.pool.push_back(d.id);

    if (options_.pre_extract) {
        for (auto& d : pool) d.triples = pre_extracted_.at(d.id);
    } else if (options_.extract_parallel > 1) {
        for (std::size_t start = 0; start < pool.size(); start += options_.extract_parallel) {
            const std::size_t end = std::min(pool.size(), start + options_.extract_parallel);
            std::vector<std::future<std::vector<Triple>>> jobs;
            for (std::size_t i = start; i < end; ++i) {
                jobs.push_back(std::async(std::launch::async, [&, i] {
                    return extract_triples(pool[i], question, *gateway_);
                }));
            }
            for (std::size_t i = start; i < end; ++i) pool[i].triples = jobs[i - start].get();
        }
    } else {
        for (auto& d : pool) d.triples = extract_triples(d, question, *gateway_);
    }

    // Typing stays sequential in pool order so the memo fills deterministically.
    for (auto& d : pool) {
        d.typed_triples = type_document_triples(d.triples, *typer_, cfg_.typing_context ? &d : nullptr);
        for (const auto& t : d.triples) encode_triple_components(t, *embedder_);
        trace.documents.push_back({d.id, d.triples, d.typed_triples});
    }
    return pool;
}

QueryResult Pipeline::run_query(const std::string& question, const std::string& question_id) {
    ReasoningTrace trace;
    trace.question_id = question_id;
    trace.question = question;
    trace.config = cfg_;

    try {
        auto pool = prepare_pool(question, trace);

        trace.decomposition = type_subqueries(decompose_query(question, *gateway_), *typer_);
        const auto& sub_queries = trace.decomposition.sub_queries;

        std::set<std::string> seen;
        auto note_entity = [&](const std::string& text) {
            if (seen.insert(text).second) trace.entity_types.push_back({text, typer_->type_entity(text)});
        };
        for (const auto& d : pool) {
            for (const auto& t : d.triples) {
                note_entity(t.head.surface());
                note_entity(t.tail.surface());
            }
        }
        for (const auto& sq : sub_queries) {
            for (const Slot* slot : {&sq.head, &sq.tail}) {
                note_entity(slot->is_latent()
                                ? latent_typing_text(slot->text(), trace.decomposition.hint(slot->text()))
                                : slot->text());
            }
        }

        BindingTable table;
        for (std::size_t i = 0; i < sub_queries.size(); ++i) {
            HopRecord hop;
            hop.index = sub_queries[i].index;
            hop.sub_query = sub_queries[i];
            hop.resolved = resolve(sub_queries[i], table);

            if (cfg_.hop_scope == HopScope::Current) {
                hop.scored_with = {hop.resolved};
            } else {
                for (const auto& sq : sub_queries) hop.scored_with.push_back(resolve(sq, table));
                hop.forced = i;
            }

            auto ranked = filter_and_rank(pool, hop.scored_with, cfg_, *embedder_, hop.forced);
            hop.scores = ranked.scored;
            hop.fallback = ranked.fallback;
            std::vector<const Document*> evidence;
            for (const auto& sd : ranked.selected) {
                hop.selected.push_back(sd.doc_id);
                for (const auto& d : pool) {
                    if (d.id == sd.doc_id) evidence.push_back(&d);
                }
            }

            trace.hops.push_back(hop);
            auto& rec = trace.hops.back();
            rec.answer = answer_subquery(rec.resolved, evidence, table, *gateway_);
            rec.binding = tasr::bind(rec.resolved, rec.answer, table);
            trace.final_bindings = table;
        }
        trace.final_answer = trace.hops.back().answer;
        trace.final_bindings = table;
        return {trace.final_answer, std::move(trace)};
    } catch (const QueryAborted&) {
        throw;
    } catch (const Error& e) {
        trace.error = e.what();
        throw QueryAborted(e.kind(), e.what(), std::move(trace));
    }
}

}  // namespace tasr
