// Command-level I2C master with a single register slave at 0x2A.
// SDA is wired-AND between master and slave; SCL is master-driven.
#include <systemc.h>

SC_MODULE(i2c_slave) {
    sc_in<bool>  scl;
    sc_in<bool>  sda;
    sc_out<bool> sda_drive;

    sc_uint<8> shift, reg;
    int bits;

    void on_lines();

    SC_CTOR(i2c_slave) : reg(0), bits(0) {
        SC_METHOD(on_lines);
        sensitive << scl << sda;
        dont_initialize();
    }
};

SC_MODULE(i2c_master) {
    sc_in_clk          clock;
    sc_in<bool>        reset;
    sc_in<bool>        start;
    sc_in<sc_uint<7>>  addr;
    sc_in<sc_uint<8>>  cmd;
    sc_out<bool>       busy;
    sc_out<sc_uint<8>> rdata;
    sc_out<bool>       nack;
    sc_out<bool>       scl;
    sc_out<bool>       sda_drive;
    sc_in<bool>        sda;

    // START, addr+W, cmd, repeated START, addr+R, read byte, NACK, STOP.
    // Every bit takes four clock phases.
    void fsm();

    SC_CTOR(i2c_master) {
        SC_METHOD(fsm);
        sensitive << clock.pos();
        dont_initialize();
    }
};

SC_MODULE(i2c) {
    sc_in_clk          clock;
    sc_in<bool>        reset;
    sc_in<bool>        start;
    sc_in<sc_uint<7>>  addr;
    sc_in<sc_uint<8>>  cmd;
    sc_out<bool>       busy;
    sc_out<sc_uint<8>> rdata;
    sc_out<bool>       nack;

    sc_signal<bool> scl, sda, m_sda, s_sda;

    i2c_master master;
    i2c_slave  slave;

    void resolve() { sda.write(m_sda.read() && s_sda.read()); }

    SC_CTOR(i2c) : master("master"), slave("slave") {
        master.clock(clock); master.reset(reset); master.start(start);
        master.addr(addr); master.cmd(cmd); master.busy(busy);
        master.rdata(rdata); master.nack(nack);
        master.scl(scl); master.sda_drive(m_sda); master.sda(sda);
        slave.scl(scl); slave.sda(sda); slave.sda_drive(s_sda);
        SC_METHOD(resolve);
        sensitive << m_sda << s_sda;
    }
};
