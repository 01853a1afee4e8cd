package gateway

import (
	"fmt"
	"log"
)

func handleCheckout(id string) {
	if err := submitOrder(id); err != nil {
		log.Errorf("checkout request failed: %v", err)
	}
}

func submitOrder(id string) error {
	if err := rpcClient.Call("billing.ChargeCard", id); err != nil {
		return fmt.Errorf("submit order %s: %w", id, err)
	}
	return nil
}
