// 4-bit ALU with an internal 1 ms sampling clock.
#include <systemc.h>

SC_MODULE(alu) {
    sc_in<sc_uint<4>>  a;
    sc_in<sc_uint<4>>  b;
    sc_in<sc_uint<3>>  op;
    sc_out<sc_uint<4>> result;

    sc_clock clk;

    void compute() {
        sc_uint<4> x = a.read(), y = b.read();
        switch (op.read()) {
            case 0: result.write(x + y); break;
            case 1: result.write(x - y); break;
            case 2: result.write(x & y); break;
            case 3: result.write(x | y); break;
            case 4: result.write(x ^ y); break;
            case 5: result.write(~x); break;
            case 6: result.write(x << 1); break;
            default: result.write(x >> 1); break;
        }
    }

    SC_CTOR(alu) : clk("clk", 1, SC_MS) {
        SC_METHOD(compute);
        sensitive << clk.posedge_event();
        dont_initialize();
    }
};
