#pragma once

#include <json.hpp>
#include <span>
#include <string>

#include "qpk/basemodels.hpp"

namespace qpk::detail {

class ModelImpl {
public:
    virtual ~ModelImpl() = default;

    virtual BaseModelKind kind() const = 0;
    virtual std::size_t dims() const = 0;
    // Unbounded decision value; predict_proba is a monotone map of it.
    virtual double margin(std::span<const double> x) const = 0;
    virtual double proba(std::span<const double> x) const { return sigmoid(margin(x)); }
    virtual nlohmann::json to_json() const = 0;
};

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

}  // namespace qpk::detail
