// krrlab CLI entry point.
// SPDX-License-Identifier: MIT
int main() { return 0; }
