#include <fstream>
#include <functional>

#include "estimate/error.hpp"
#include "estimate/pipeline.hpp"

namespace estimate::pipeline {

using nlohmann::json;

namespace {

struct Field {
  const char* key;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

template <class T, class Member>
Field field(const char* key, Member member) {
  return {key, [member](const RunConfig& c) { return json(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const json& v) { member(c) = v.get<T>(); }};
}

#define ESTIMATE_FIELD(T, key, expr) field<T>(key, [](RunConfig& c) -> T& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = [] {
    std::vector<Field> f{
        ESTIMATE_FIELD(std::size_t, "lookback", c.model.temporal.lookback),
        ESTIMATE_FIELD(std::size_t, "lookahead", c.lookahead),
        ESTIMATE_FIELD(std::size_t, "proj_width", c.model.temporal.proj_width),
        ESTIMATE_FIELD(std::size_t, "conv_channels", c.model.temporal.conv_channels),
        ESTIMATE_FIELD(std::size_t, "kernel", c.model.temporal.kernel),
        ESTIMATE_FIELD(std::size_t, "hidden", c.model.temporal.hidden),
        ESTIMATE_FIELD(std::size_t, "memory_dim", c.model.temporal.memory_dim),
        ESTIMATE_FIELD(std::size_t, "dgf_hidden", c.model.temporal.dgf_hidden),
        ESTIMATE_FIELD(std::size_t, "hconv_layers", c.model.hconv_layers),
        ESTIMATE_FIELD(std::size_t, "hconv_width", c.model.hconv_width),
        ESTIMATE_FIELD(std::size_t, "order", c.model.order),
        ESTIMATE_FIELD(double, "scale", c.model.scale),
        ESTIMATE_FIELD(std::size_t, "head_hidden", c.model.head_hidden),
        ESTIMATE_FIELD(double, "learning_rate", c.train.learning_rate),
        ESTIMATE_FIELD(std::size_t, "batch_days", c.train.batch_days),
        ESTIMATE_FIELD(std::size_t, "epochs", c.train.epochs),
        ESTIMATE_FIELD(std::size_t, "patience", c.train.patience),
        ESTIMATE_FIELD(std::uint64_t, "seed", c.train.seed),
        ESTIMATE_FIELD(std::size_t, "corr_max_lag", c.correlation.max_lag),
        ESTIMATE_FIELD(double, "corr_threshold", c.correlation.threshold),
        ESTIMATE_FIELD(std::size_t, "corr_min_cluster", c.correlation.min_cluster),
        ESTIMATE_FIELD(std::size_t, "corr_history", c.correlation.history),
        ESTIMATE_FIELD(std::size_t, "corr_min_history", c.correlation.min_history),
        ESTIMATE_FIELD(double, "train_months", c.phases.train_months),
        ESTIMATE_FIELD(double, "valid_months", c.phases.valid_months),
        ESTIMATE_FIELD(double, "test_months", c.phases.test_months),
        ESTIMATE_FIELD(double, "days_per_month", c.phases.days_per_month),
        ESTIMATE_FIELD(std::size_t, "stride_days", c.phases.stride_days),
        ESTIMATE_FIELD(std::size_t, "max_phases", c.max_phases),
        ESTIMATE_FIELD(double, "trailing_stop", c.risk.trailing_stop),
        ESTIMATE_FIELD(double, "take_profit", c.risk.take_profit),
        ESTIMATE_FIELD(std::size_t, "top_k", c.risk.top_k),
        ESTIMATE_FIELD(std::size_t, "rebalance", c.risk.rebalance),
        ESTIMATE_FIELD(double, "cost", c.risk.cost),
        ESTIMATE_FIELD(double, "jitter", c.risk.jitter),
        ESTIMATE_FIELD(std::size_t, "repeats", c.repeats),
        ESTIMATE_FIELD(std::vector<std::size_t>, "ma_windows", c.indicators.ma_windows),
        ESTIMATE_FIELD(std::vector<std::size_t>, "ratio_windows", c.indicators.ratio_windows),
        ESTIMATE_FIELD(std::size_t, "rsi", c.indicators.rsi),
        ESTIMATE_FIELD(std::size_t, "adx", c.indicators.adx),
        ESTIMATE_FIELD(std::size_t, "atr", c.indicators.atr),
        ESTIMATE_FIELD(std::size_t, "stochastic", c.indicators.stochastic),
        ESTIMATE_FIELD(std::size_t, "mfi", c.indicators.mfi),
        ESTIMATE_FIELD(std::size_t, "bollinger", c.indicators.bollinger),
        ESTIMATE_FIELD(double, "bollinger_m", c.indicators.bollinger_m),
        ESTIMATE_FIELD(std::size_t, "macd_short", c.indicators.macd_short),
        ESTIMATE_FIELD(std::size_t, "macd_long", c.indicators.macd_long),
    };
    f.push_back({"indicators",
                 [](const RunConfig& c) {
                   json a = json::array();
                   for (auto ind : c.indicators.enabled) a.push_back(indicators::to_string(ind));
                   return a;
                 },
                 [](RunConfig& c, const json& v) {
                   c.indicators.enabled.clear();
                   for (const auto& name : v) c.indicators.enabled.push_back(indicators::parse_indicator(name));
                 }});
    f.push_back({"phase_unit",
                 [](const RunConfig& c) {
                   return json(c.phases.unit == market::PhaseUnit::CalendarDates ? "calendar" : "trading");
                 },
                 [](RunConfig& c, const json& v) {
                   const auto name = v.get<std::string>();
                   if (name == "trading") c.phases.unit = market::PhaseUnit::TradingDays;
                   else if (name == "calendar") c.phases.unit = market::PhaseUnit::CalendarDates;
                   else throw Error(ErrorCode::ConfigInvalid, "phase_unit must be 'trading' or 'calendar'");
                 }});
    f.push_back({"ablation", [](const RunConfig& c) { return json(c.train.ablation.name()); },
                 [](RunConfig& c, const json& v) { c.train.ablation = model::AblationFlags::parse(v.get<std::string>()); }});
    return f;
  }();
  return kFields;
}

#undef ESTIMATE_FIELD

}  // namespace

void RunConfig::validate() const {
  indicators.validate();
  model.validate();
  train.validate();
  risk.validate();
  if (lookahead == 0) throw Error(ErrorCode::ConfigInvalid, "lookahead must be positive");
  if (repeats == 0) throw Error(ErrorCode::ConfigInvalid, "repeats must be positive");
  if (phases.stride_days == 0) throw Error(ErrorCode::ConfigInvalid, "stride_days must be positive");
  if (!(correlation.threshold <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "corr_threshold must be <= 1");
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    const Field* f = nullptr;
    for (const auto& candidate : fields()) {
      if (key == candidate.key) f = &candidate;
    }
    if (!f) throw Error(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
    try {
      f->set(c, value);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid, "bad value for '" + key + "': " + e.what());
    }
  }
  c.model.temporal.input_channels = indicators::feature_spec(c.indicators).channels.size();
  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& f : fields()) j[f.key] = f.get(c);
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace estimate::pipeline
