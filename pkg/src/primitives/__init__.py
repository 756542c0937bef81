"""
Group arithmetic, signatures and encryption schemes shared by the protocol
"""
