#include <iostream>

int main() {
    std::cout << "symred CLI placeholder\n";
    return 0;
}
