// Multi-context CRC-16/CRC-32 unit.
//
// ctrl bits: 0 = CRC-32 (else CRC-16), 1 = reflect in/out, 2 = invert
// output, 3 = byte-swap output, 4 = (re)initialise the selected context.
#include <systemc.h>

SC_MODULE(crc) {
    sc_in_clk           clock;
    sc_in<bool>         reset;
    sc_in<sc_uint<8>>   data_in;
    sc_in<sc_uint<4>>   context_sel;
    sc_in<sc_uint<8>>   ctrl;
    sc_in<bool>         data_valid;
    sc_out<sc_uint<32>> crc_out;

    struct context_t {
        sc_uint<32> state;
        sc_uint<4>  config;
    };
    context_t ctx[16];
    sc_uint<32> table16[256], table32[256];

    void build_tables();
    sc_uint<32> finalize(const context_t &c) const;

    void tick() {
        if (reset.read()) {
            for (int i = 0; i < 16; i++) { ctx[i].state = 0; ctx[i].config = 0; }
        } else {
            context_t &c = ctx[context_sel.read()];
            sc_uint<8> k = ctrl.read();
            if (k[4]) {
                c.config = k.range(3, 0);
                c.state = k[0] ? 0xFFFFFFFF : 0x0000;
            } else if (data_valid.read()) {
                sc_uint<8> d = data_in.read();
                if (c.config[1]) d = reverse8(d);
                if (c.config[0]) c.state = (c.state << 8) ^ table32[(c.state >> 24) ^ d];
                else c.state = ((c.state << 8) ^ table16[((c.state >> 8) ^ d) & 0xFF]) & 0xFFFF;
            }
        }
        crc_out.write(finalize(ctx[context_sel.read()]));
    }

    static sc_uint<8> reverse8(sc_uint<8> v);

    SC_CTOR(crc) {
        build_tables();
        SC_METHOD(tick);
        sensitive << clock.pos();
        dont_initialize();
    }
};
