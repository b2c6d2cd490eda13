// Sine source with a piecewise-constant amplitude/frequency schedule.
#include <systemc.h>
#include <cmath>

SC_MODULE(sine_stim) {
    sc_out<double> y;
    sc_in_clk      clock;

    struct segment { double from_s, amplitude, frequency_hz; };
    std::vector<segment> schedule;

    void sample() {
        double t = sc_time_stamp().to_seconds();
        const segment *s = &schedule.front();
        for (const auto &seg : schedule)
            if (seg.from_s <= t) s = &seg;
        y.write(s->amplitude * std::sin(2.0 * M_PI * s->frequency_hz * t));
    }

    SC_CTOR(sine_stim) {
        SC_METHOD(sample);
        sensitive << clock.pos();
        dont_initialize();
    }
};
