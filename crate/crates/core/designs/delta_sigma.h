// N-th order delta-sigma modulator with unit-gain integrators.
#include <systemc.h>

SC_MODULE(delta_sigma) {
    sc_in<double> x_in;
    sc_in<bool>   reset_n;
    sc_out<bool>  y_out;
    sc_in_clk     clock;

    int order;
    std::vector<double> integ;

    void step() {
        if (!reset_n.read()) {
            std::fill(integ.begin(), integ.end(), 0.0);
            y_out.write(true);
            return;
        }
        double v = y_out.read() ? 1.0 : -1.0;
        integ[0] += x_in.read() - v;
        for (int k = 1; k < order; k++)
            integ[k] += integ[k - 1] - v;
        y_out.write(integ[order - 1] >= 0.0);
    }

    SC_HAS_PROCESS(delta_sigma);
    delta_sigma(sc_module_name n, int order = 2) : sc_module(n), order(order), integ(order, 0.0) {
        SC_METHOD(step);
        sensitive << clock.pos();
        dont_initialize();
    }
};
