"""
Pacote de utilitários do loopsched.
"""
