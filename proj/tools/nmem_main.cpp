#include "nmem/engine.hpp"
#include "nmem/errors.hpp"
#include "nmem/plot.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>

namespace {

using nlohmann::json;

struct GlobalFlags {
    std::string config_file;
    std::string data_dir;
    bool json_output = false;
    std::optional<std::uint64_t> seed;
    std::string mode = "full";
    std::optional<std::size_t> k;
};

int exit_code(nmem::ErrorCode code) {
    switch (code) {
        case nmem::ErrorCode::Usage: return 2;
        case nmem::ErrorCode::NotFound: return 3;
        case nmem::ErrorCode::EmptyStore: return 4;
        case nmem::ErrorCode::BackendUnavailable:
        case nmem::ErrorCode::Timeout: return 5;
        default: return 1;
    }
}

nmem::EngineConfig resolve_config(const GlobalFlags& flags) {
    std::optional<std::filesystem::path> file;
    if (!flags.config_file.empty()) file = flags.config_file;
    auto config = nmem::load_config(file, nmem::process_environment());
    if (!flags.data_dir.empty()) config.data_dir = flags.data_dir;
    if (flags.seed) config.seed = *flags.seed;
    if (flags.k) config.retrieval_k = *flags.k;
    return config;
}

void print_stats_table(const nmem::ConsolidationStats& s) {
    std::cout << "Episode  Exper.  Thread  Discard  Dis. Rate\n";
    std::cout << std::left << std::setw(9) << s.n_episodes << std::setw(8) << s.n_experiences << std::setw(8)
              << s.n_threads << std::setw(9) << s.n_discard << std::fixed << std::setprecision(2)
              << s.discard_rate * 100.0 << "%\n";
    std::cout.unsetf(std::ios::fixed);
}

void print_answer(const nmem::QueryResult& r) {
    std::cout << r.answer.text << "\n";
    auto list = [](const char* label, const std::vector<std::string>& ids) {
        if (ids.empty()) return;
        std::cout << label << ":";
        for (const auto& id : ids) std::cout << " " << id;
        std::cout << "\n";
    };
    list("episodes", r.answer.cited_episode_ids);
    list("threads", r.answer.cited_thread_ids);
    list("facts", r.answer.cited_fact_ids);
    for (const auto& w : r.bundle.warnings) std::cerr << "warning: " << w << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nmem: long-term conversational memory engine"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags flags;
    app.add_option("--config", flags.config_file, "INI config file");
    app.add_option("--data-dir", flags.data_dir, "Data directory");
    app.add_flag("--json", flags.json_output, "Machine-readable output");
    app.add_option("--seed", flags.seed, "Clustering seed");
    app.add_option("--mode", flags.mode, "full | episodic-only | semantic-20 | semantic-40 | no-agentic");
    app.add_option("--k", flags.k, "Episodic hits per query")->check(CLI::PositiveNumber);

    std::string path_arg, conv_arg, text_arg, user_arg, format_arg = "markdown", out_arg;
    bool judge = false;

    auto* ingest = app.add_subcommand("ingest", "Register a conversation file");
    ingest->add_option("conversation", path_arg, "Conversation JSON")->required();

    auto* consolidate = app.add_subcommand("consolidate", "Build episodic memory, traces, threads and cards");
    consolidate->add_option("conversation_id", conv_arg)->required();

    auto* build_cards = app.add_subcommand("build-cards", "Rebuild memory cards from stored threads");
    build_cards->add_option("conversation_id", conv_arg)->required();

    auto* query = app.add_subcommand("query", "Answer a question from memory");
    query->add_option("conversation_id", conv_arg)->required();
    query->add_option("question", text_arg)->required();
    query->add_option("--user", user_arg, "Restrict card selection to this user");

    auto* eval = app.add_subcommand("eval", "Score a QA file");
    eval->add_option("conversation_id", conv_arg)->required();
    eval->add_option("qa_file", path_arg)->required();
    eval->add_flag("--judge", judge, "Score with the LLM judge instead of offline matching");

    auto* stats = app.add_subcommand("stats", "Print consolidation statistics");
    stats->add_option("conversation_id", conv_arg)->required();

    auto* export_card = app.add_subcommand("export-card", "Render a user's memory card");
    export_card->add_option("conversation_id", conv_arg)->required();
    export_card->add_option("user", user_arg)->required();
    export_card->add_option("--format", format_arg, "markdown | json")->check(CLI::IsMember({"markdown", "json"}));
    export_card->add_option("--out", out_arg, "Write to file instead of stdout");

    auto* plot = app.add_subcommand("plot-clusters", "Export cluster diagnostics and a density plot");
    plot->add_option("conversation_id", conv_arg)->required();
    plot->add_option("--user", user_arg, "Only this user");
    plot->add_option("--out", out_arg, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const auto mode = nmem::parse_search_mode(flags.mode);
        nmem::Engine engine(resolve_config(flags));
        const auto& config = engine.config();

        if (*ingest) {
            const auto r = engine.ingest(path_arg);
            if (flags.json_output) {
                std::cout << json{{"conversation_id", r.conversation_id},
                                  {"sessions", r.sessions},
                                  {"utterances", r.utterances},
                                  {"replaced", r.replaced}}
                                 .dump(2)
                          << "\n";
            } else {
                std::cout << "ingested 1 conversation, " << r.sessions << " sessions (" << r.conversation_id << ")\n";
                if (r.replaced) std::cout << "note: replaced the previously ingested version of " << r.conversation_id << "\n";
            }
        } else if (*consolidate) {
            const auto r = engine.consolidate(conv_arg);
            if (flags.json_output) {
                std::cout << nmem::to_json(r).dump(2) << "\n";
            } else {
                print_stats_table(r.stats);
                for (const auto& [user, n] : r.traces_per_user) {
                    std::cout << user << ": " << n << " traces, " << r.topics_per_user.at(user) << " topics, "
                              << r.threads_per_user.at(user) << " threads\n";
                }
            }
        } else if (*build_cards) {
            const auto cards = engine.build_cards(conv_arg);
            if (flags.json_output) {
                json arr = json::array();
                for (const auto& c : cards) arr.push_back(nmem::to_json(c));
                std::cout << arr.dump(2) << "\n";
            } else {
                for (const auto& c : cards) {
                    std::cout << c.user_id << ": \"" << c.theme_title << "\", " << c.sections.size() << " sections, version "
                              << c.version << "\n";
                }
            }
        } else if (*query) {
            nmem::Query q;
            q.text = text_arg;
            q.k = config.retrieval_k;
            if (!user_arg.empty()) q.user_hint = user_arg;
            const auto r = engine.query(conv_arg, q, mode);
            if (flags.json_output) {
                std::cout << nmem::to_json(r).dump(2) << "\n";
            } else {
                print_answer(r);
            }
        } else if (*eval) {
            const auto qa = nmem::load_qa(path_arg);
            const auto report = engine.eval(conv_arg, qa, mode,
                                            judge ? nmem::ScoringMode::LlmJudge : nmem::ScoringMode::OfflineMatch,
                                            config.retrieval_k);
            if (flags.json_output) {
                std::cout << nmem::to_json(report).dump(2) << "\n";
            } else {
                const auto j = nmem::to_json(report);
                for (const char* col : {"SingleHop", "MultiHop", "Temporal", "OpenDomain", "Overall"}) {
                    std::cout << std::left << std::setw(11) << col << std::fixed << std::setprecision(4)
                              << j.at(col).get<double>() << "\n";
                }
                for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
            }
        } else if (*stats) {
            const auto s = engine.stats(conv_arg);
            if (flags.json_output) {
                std::cout << nmem::to_json(s).dump(2) << "\n";
            } else {
                print_stats_table(s);
            }
        } else if (*export_card) {
            const auto card = engine.card(conv_arg, user_arg);
            const auto fmt = format_arg == "json" || flags.json_output ? nmem::CardFormat::Json : nmem::CardFormat::Markdown;
            const auto rendered = nmem::render_card(card, fmt);
            if (out_arg.empty()) {
                std::cout << rendered;
            } else {
                nmem::write_text_atomic(out_arg, rendered);
            }
        } else if (*plot) {
            const auto clusters = engine.clusters(conv_arg);
            const auto index = engine.load_index(conv_arg);
            json written = json::array();
            for (const auto& [user, uc] : clusters) {
                if (!user_arg.empty() && user != user_arg) continue;
                const auto p = nmem::project_clusters(user, uc, index);
                const std::filesystem::path dir(out_arg);
                const auto json_path = dir / ("clusters_" + user + ".json");
                const auto svg_path = dir / ("clusters_" + user + ".svg");
                nmem::write_text_atomic(json_path, nmem::to_json(p).dump(2) + "\n");
                nmem::write_text_atomic(svg_path, nmem::render_density_svg(p));
                written.push_back({{"user", user}, {"json", json_path.string()}, {"svg", svg_path.string()}});
            }
            if (!user_arg.empty() && written.empty()) throw nmem::NotFoundError({user_arg}, "no clusters for user");
            if (flags.json_output) {
                std::cout << written.dump(2) << "\n";
            } else {
                for (const auto& w : written) std::cout << "wrote " << w["json"].get<std::string>() << " and "
                                                        << w["svg"].get<std::string>() << "\n";
            }
        }
    } catch (const nmem::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
