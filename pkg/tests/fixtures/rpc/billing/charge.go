package billing

import (
	"errors"
	"fmt"
)

func ChargeCard(id string) error {
	rpcServer.Handle("billing.ChargeCard")
	if err := authorize(id); err != nil {
		return fmt.Errorf("charge declined: %w", err)
	}
	return nil
}

func RefundCard(id string) error {
	rpcServer.Handle("billing.RefundCard")
	return errors.New("refund window closed")
}

func authorize(id string) error {
	return errors.New("card issuer unreachable")
}
