#pragma once

#include <exception>
#include <ostream>

#include "lumen/errors.hpp"

namespace lumen::cli {

template <typename F>
int guarded(std::ostream& log, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DesignError& e) {
        log << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const CapacityError& e) {
        log << "config error: " << e.what() << " (max feasible " << e.max_feasible() << ")\n";
        return kConfigError;
    } catch (const CalibrationError& e) {
        log << "calibration failed: " << e.what() << '\n';
        return kCalibrationFailure;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace lumen::cli
