#include "sentisim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sentisim/io.hpp"

namespace sentisim::config {

namespace {

using ordered_json = nlohmann::ordered_json;

void require_keys(const ordered_json& object, const std::set<std::string>& allowed,
                  const std::string& scope) {
    if (!object.is_object()) throw ConfigError(scope + " must be a JSON object");
    for (const auto& [key, value] : object.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key in " + scope + ": " + key);
    }
}

double as_number(const ordered_json& value, const std::string& scope) {
    if (!value.is_number()) throw ConfigError(scope + " must be a number");
    return value.get<double>();
}

long as_integer(const ordered_json& value, const std::string& scope) {
    if (!value.is_number_integer()) throw ConfigError(scope + " must be an integer");
    return value.get<long>();
}

sentiment::PiecewiseSchedule parse_schedule(const ordered_json& value,
                                            const std::string& scope) {
    if (!value.is_array() || value.empty()) {
        throw ConfigError(scope + " must be a non-empty array of [t_start, psi] pairs");
    }
    sentiment::PiecewiseSchedule schedule;
    for (const auto& entry : value) {
        if (!entry.is_array() || entry.size() != 2) {
            throw ConfigError(scope + " entries must be [t_start, psi] pairs");
        }
        schedule.segments.push_back(
            {as_integer(entry[0], scope + "[0]"), as_number(entry[1], scope + "[1]")});
    }
    return schedule;
}

Eigen::MatrixXd parse_matrix(const ordered_json& value, const std::string& scope) {
    if (!value.is_array() || value.empty()) throw ConfigError(scope + " must be an array of rows");
    const std::size_t n = value.size();
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!value[i].is_array() || value[i].size() != n) {
            throw ConfigError(scope + " must be a square array of rows");
        }
        for (std::size_t j = 0; j < n; ++j) {
            m(i, j) = as_number(value[i][j], scope);
        }
    }
    return m;
}

void parse_market(const ordered_json& object, market::MarketConfig& market) {
    require_keys(object,
                 {"agents", "steps", "participation", "initial_price", "initial_cash_mean",
                  "initial_cash_sd", "initial_shares", "volatility", "sentiment"},
                 "market");
    if (object.contains("agents")) market.n_agents = static_cast<int>(as_integer(object["agents"], "market.agents"));
    if (object.contains("steps")) market.n_steps = as_integer(object["steps"], "market.steps");
    if (object.contains("participation")) market.participation = as_number(object["participation"], "market.participation");
    if (object.contains("initial_price")) market.initial_price = as_number(object["initial_price"], "market.initial_price");
    if (object.contains("initial_cash_mean")) market.initial_cash_mean = as_number(object["initial_cash_mean"], "market.initial_cash_mean");
    if (object.contains("initial_cash_sd")) market.initial_cash_sd = as_number(object["initial_cash_sd"], "market.initial_cash_sd");
    if (object.contains("initial_shares")) market.initial_shares = as_number(object["initial_shares"], "market.initial_shares");

    if (object.contains("volatility")) {
        const auto& vol = object["volatility"];
        if (vol.is_number()) {
            market.volatility = vol.get<double>();
        } else {
            require_keys(vol, {"mean", "sd"}, "market.volatility");
            sentiment::VolatilitySpec spec;
            if (vol.contains("mean")) spec.mean = as_number(vol["mean"], "market.volatility.mean");
            if (vol.contains("sd")) spec.sd = as_number(vol["sd"], "market.volatility.sd");
            market.volatility = spec;
        }
    }

    if (object.contains("sentiment")) {
        const auto& sent = object["sentiment"];
        require_keys(sent, {"type", "states", "transition", "initial", "groups"},
                     "market.sentiment");
        if (!sent.contains("type") || !sent["type"].is_string()) {
            throw ConfigError("market.sentiment.type must be 'markov' or 'groups'");
        }
        const std::string type = sent["type"].get<std::string>();
        if (type == "markov") {
            sentiment::MarkovSentimentSpec spec;
            if (sent.contains("states")) {
                spec.states.clear();
                for (const auto& s : sent["states"]) {
                    spec.states.push_back(as_number(s, "market.sentiment.states"));
                }
            }
            if (sent.contains("transition")) {
                spec.transition = parse_matrix(sent["transition"], "market.sentiment.transition");
            } else {
                spec.transition = experiments::demo_transition_matrix();
            }
            if (sent.contains("initial")) {
                const auto& init = sent["initial"];
                spec.initial.resize(init.size());
                for (std::size_t i = 0; i < init.size(); ++i) {
                    spec.initial(i) = as_number(init[i], "market.sentiment.initial");
                }
            }
            market.sentiment = std::move(spec);
        } else if (type == "groups") {
            if (!sent.contains("groups")) throw ConfigError("market.sentiment.groups required");
            std::vector<sentiment::GroupSpec> groups;
            for (const auto& g : sent["groups"]) {
                require_keys(g, {"weight", "schedule"}, "market.sentiment.groups[]");
                sentiment::GroupSpec group;
                if (g.contains("weight")) group.weight = as_number(g["weight"], "weight");
                if (g.contains("schedule")) {
                    group.schedule = parse_schedule(g["schedule"], "schedule");
                }
                groups.push_back(std::move(group));
            }
            market.sentiment = std::move(groups);
        } else {
            throw ConfigError("market.sentiment.type must be 'markov' or 'groups'");
        }
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    ordered_json document;
    try {
        document = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    require_keys(document, {"seed", "out", "workers", "market", "hmm", "rnn", "experiment"},
                 "config");

    RunConfig config;
    if (document.contains("seed")) {
        const auto& seed = document["seed"];
        if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<long long>() < 0)) {
            throw ConfigError("seed must be a non-negative integer");
        }
        config.seed = seed.get<std::uint64_t>();
    }
    if (document.contains("out")) {
        if (!document["out"].is_string()) throw ConfigError("out must be a string");
        config.out_dir = document["out"].get<std::string>();
    }
    if (document.contains("workers")) {
        config.workers = static_cast<int>(as_integer(document["workers"], "workers"));
        if (config.workers < 1) throw ConfigError("workers must be at least 1");
    }
    if (document.contains("market")) parse_market(document["market"], config.market);
    if (document.contains("hmm")) {
        const auto& h = document["hmm"];
        require_keys(h, {"states", "symbols", "restarts", "tol", "max_iter"}, "hmm");
        if (h.contains("states")) config.hmm.n_hidden = static_cast<int>(as_integer(h["states"], "hmm.states"));
        if (h.contains("symbols")) config.hmm.n_symbols = static_cast<int>(as_integer(h["symbols"], "hmm.symbols"));
        if (h.contains("restarts")) config.hmm.bw.n_restarts = static_cast<int>(as_integer(h["restarts"], "hmm.restarts"));
        if (h.contains("tol")) config.hmm.bw.tol = as_number(h["tol"], "hmm.tol");
        if (h.contains("max_iter")) config.hmm.bw.max_iter = static_cast<int>(as_integer(h["max_iter"], "hmm.max_iter"));
    }
    if (document.contains("rnn")) {
        const auto& r = document["rnn"];
        require_keys(r, {"unroll", "epochs", "memory", "learning_rate", "train_fraction",
                         "clip", "init_scale"},
                     "rnn");
        if (r.contains("unroll")) config.rnn.unroll = static_cast<int>(as_integer(r["unroll"], "rnn.unroll"));
        if (r.contains("epochs")) config.rnn.epochs = static_cast<int>(as_integer(r["epochs"], "rnn.epochs"));
        if (r.contains("memory")) config.rnn.memory = static_cast<int>(as_integer(r["memory"], "rnn.memory"));
        if (r.contains("learning_rate")) config.rnn.learning_rate = as_number(r["learning_rate"], "rnn.learning_rate");
        if (r.contains("train_fraction")) config.rnn.train_fraction = as_number(r["train_fraction"], "rnn.train_fraction");
        if (r.contains("clip")) config.rnn.clip = as_number(r["clip"], "rnn.clip");
        if (r.contains("init_scale")) config.rnn.init_scale = as_number(r["init_scale"], "rnn.init_scale");
    }
    if (document.contains("experiment")) {
        const auto& e = document["experiment"];
        require_keys(e, {"sims", "diag_low", "diag_high", "burn"}, "experiment");
        if (e.contains("sims")) config.experiment.n_sims = static_cast<int>(as_integer(e["sims"], "experiment.sims"));
        if (e.contains("diag_low")) config.experiment.diag_low = as_number(e["diag_low"], "experiment.diag_low");
        if (e.contains("diag_high")) config.experiment.diag_high = as_number(e["diag_high"], "experiment.diag_high");
        if (e.contains("burn")) config.experiment.burn = as_integer(e["burn"], "experiment.burn");
    }
    return config;
}

RunConfig load_run_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file: " + file.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str());
}

std::string to_json(const RunConfig& config) {
    ordered_json document;
    document["seed"] = config.seed;
    document["out"] = config.out_dir.string();
    document["workers"] = config.workers;

    ordered_json market;
    market["agents"] = config.market.n_agents;
    market["steps"] = config.market.n_steps;
    market["participation"] = config.market.participation;
    market["initial_price"] = config.market.initial_price;
    market["initial_cash_mean"] = config.market.initial_cash_mean;
    market["initial_cash_sd"] = config.market.initial_cash_sd;
    market["initial_shares"] = config.market.initial_shares;
    if (const auto* fixed = std::get_if<double>(&config.market.volatility)) {
        market["volatility"] = *fixed;
    } else {
        const auto& spec = std::get<sentiment::VolatilitySpec>(config.market.volatility);
        market["volatility"] = {{"mean", spec.mean}, {"sd", spec.sd}};
    }
    if (const auto* markov =
            std::get_if<sentiment::MarkovSentimentSpec>(&config.market.sentiment)) {
        ordered_json sent;
        sent["type"] = "markov";
        sent["states"] = markov->states;
        ordered_json rows = ordered_json::array();
        for (Eigen::Index i = 0; i < markov->transition.rows(); ++i) {
            ordered_json row = ordered_json::array();
            for (Eigen::Index j = 0; j < markov->transition.cols(); ++j) {
                row.push_back(markov->transition(i, j));
            }
            rows.push_back(row);
        }
        sent["transition"] = rows;
        if (markov->initial.size() > 0) {
            ordered_json init = ordered_json::array();
            for (Eigen::Index i = 0; i < markov->initial.size(); ++i) {
                init.push_back(markov->initial(i));
            }
            sent["initial"] = init;
        }
        market["sentiment"] = sent;
    } else {
        const auto& groups =
            std::get<std::vector<sentiment::GroupSpec>>(config.market.sentiment);
        ordered_json sent;
        sent["type"] = "groups";
        ordered_json list = ordered_json::array();
        for (const auto& group : groups) {
            ordered_json g;
            g["weight"] = group.weight;
            ordered_json schedule = ordered_json::array();
            for (const auto& segment : group.schedule.segments) {
                schedule.push_back({segment.start, segment.psi});
            }
            g["schedule"] = schedule;
            list.push_back(g);
        }
        sent["groups"] = list;
        market["sentiment"] = sent;
    }
    document["market"] = market;

    document["hmm"] = {{"states", config.hmm.n_hidden},
                       {"symbols", config.hmm.n_symbols},
                       {"restarts", config.hmm.bw.n_restarts},
                       {"tol", config.hmm.bw.tol},
                       {"max_iter", config.hmm.bw.max_iter}};
    document["rnn"] = {{"unroll", config.rnn.unroll},
                       {"epochs", config.rnn.epochs},
                       {"memory", config.rnn.memory},
                       {"learning_rate", config.rnn.learning_rate},
                       {"train_fraction", config.rnn.train_fraction},
                       {"clip", config.rnn.clip},
                       {"init_scale", config.rnn.init_scale}};
    document["experiment"] = {{"sims", config.experiment.n_sims},
                              {"diag_low", config.experiment.diag_low},
                              {"diag_high", config.experiment.diag_high},
                              {"burn", config.experiment.burn}};
    return document.dump(2) + "\n";
}

}  // namespace sentisim::config
